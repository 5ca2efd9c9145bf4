//! One iteration: draw a dataset, run every requested method, score the intervals.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use super::methods::{MethodId, Route};
use super::rng::{iteration_seed, stream_rng, Stream};
use crate::datagen::{sample_dataset, Dataset, SimulationDesign, Setup};
use crate::error::{Error, Result};
use crate::estimands::{submodel_target, validation_r2, FailureCode, SubmodelTarget, VariableOutcome};
use crate::inference::{
    ols_fit, posi_ci, posi_constant, selective_ci_exact, split_inference, wald_ci, ExactOptions, OlsFit,
    PosiConstant, SelectiveInterval,
};
use crate::selection::{full_model_sigma, LassoSelector, SelectionResult, Selector, Tuning};

use super::config::{REALISTIC_POSI_MC, TOY_POSI_MC};

/// Per-run constants shared by all iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub alpha: f64,
    pub posi_mc: usize,
    pub posi_max_size: Option<usize>,
    pub neg_mc: usize,
    pub cv_folds: usize,
    pub exact: ExactOptions,
}

impl RunSettings {
    pub fn for_setup(setup: Setup, alpha: f64) -> Self {
        Self {
            alpha,
            posi_mc: match setup {
                Setup::Toy => TOY_POSI_MC,
                Setup::Realistic => REALISTIC_POSI_MC,
            },
            posi_max_size: None,
            neg_mc: crate::tuning::DEFAULT_NEGAHBAN_MC,
            cv_folds: crate::tuning::DEFAULT_FOLDS,
            exact: ExactOptions::default(),
        }
    }
}

/// Result of one method on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodIteration {
    pub method: MethodId,
    pub model: Vec<usize>,
    pub lambda: Option<f64>,
    pub validation_r2: Option<f64>,
    /// Method-level failure, or the first per-variable failure.
    pub failure: Option<FailureCode>,
    /// One entry per predictor, in predictor order.
    pub outcomes: Vec<VariableOutcome>,
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub scenario_id: String,
    pub iteration: usize,
    pub seed: u64,
    pub methods: Vec<MethodIteration>,
    pub timings: Vec<(MethodId, Duration)>,
}

/// Inference output of one method on one dataset, before scoring.
#[derive(Debug)]
pub struct MethodRun {
    pub method: MethodId,
    pub model: Vec<usize>,
    pub lambda: Option<f64>,
    /// OLS fit whose predictions define the method's validation R².
    pub prediction_fit: Option<OlsFit>,
    /// One entry per model variable, in model order; empty after a method-level failure.
    pub intervals: Vec<Result<SelectiveInterval>>,
    pub failure: Option<FailureCode>,
}

impl MethodRun {
    fn failed(method: MethodId, model: Vec<usize>, lambda: Option<f64>, code: FailureCode) -> Self {
        Self { method, model, lambda, prediction_fit: None, intervals: Vec::new(), failure: Some(code) }
    }
}

fn clone_err<T: Clone>(r: &Result<T>) -> Result<T> {
    match r {
        Ok(v) => Ok(v.clone()),
        Err(e) => Err(match e {
            Error::RankDeficient { columns } => Error::RankDeficient { columns: columns.clone() },
            Error::DegenerateInterval { variable } => Error::DegenerateInterval { variable: *variable },
            Error::EventInconsistency(s) => Error::EventInconsistency(s.clone()),
            Error::DegenerateData { scenario, attempts } => Error::DegenerateData { scenario: scenario.clone(), attempts: *attempts },
            other => Error::InvalidInput(other.to_string()),
        }),
    }
}

/// Runs methods on one standardized dataset. Selections, the full-model σ̂ and
/// the PoSI constant are computed once and shared between methods; every random
/// draw comes from the stream of its purpose, so results do not depend on which
/// other methods run.
pub struct Session<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    settings: RunSettings,
    seed: u64,
    full_sigma: Option<Result<(f64, f64)>>,
    cv: [Option<Result<SelectionResult>>; 2],
    neg: [Option<Result<SelectionResult>>; 2],
    posi: Option<Result<PosiConstant>>,
}

impl<'a> Session<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>, settings: RunSettings, seed: u64) -> Self {
        Self { x, y, settings, seed, full_sigma: None, cv: [None, None], neg: [None, None], posi: None }
    }

    fn full_sigma(&mut self) -> Result<(f64, f64)> {
        if self.full_sigma.is_none() {
            self.full_sigma = Some(full_model_sigma(self.x, self.y));
        }
        clone_err(self.full_sigma.as_ref().unwrap())
    }

    fn tuned_selection(&mut self, adaptive: bool, neg: bool) -> Result<SelectionResult> {
        let slot = adaptive as usize;
        let cached = if neg { &self.neg[slot] } else { &self.cv[slot] };
        if let Some(r) = cached {
            return clone_err(r);
        }
        let tuning = if neg {
            Tuning::Negahban { n_mc: self.settings.neg_mc }
        } else {
            Tuning::Cv { folds: self.settings.cv_folds }
        };
        let stream = match (adaptive, neg) {
            (false, false) => Stream::LassoCv,
            (true, false) => Stream::AlassoCv,
            (false, true) => Stream::LassoNeg,
            (true, true) => Stream::AlassoNeg,
        };
        let sel = LassoSelector { adaptive, tuning };
        let res = sel.select(self.x, self.y, &mut stream_rng(self.seed, stream));
        let out = clone_err(&res);
        if neg {
            self.neg[slot] = Some(res);
        } else {
            self.cv[slot] = Some(res);
        }
        out
    }

    fn posi(&mut self) -> Result<PosiConstant> {
        if self.posi.is_none() {
            let res = self.full_sigma().and_then(|(_, df)| {
                let mut rng = stream_rng(self.seed, Stream::Posi);
                posi_constant(self.x, self.settings.alpha, self.settings.posi_max_size, Some(df), self.settings.posi_mc, &mut rng)
            });
            self.posi = Some(res);
        }
        clone_err(self.posi.as_ref().unwrap())
    }

    /// Runs `method`; `support` is the model used by the Oracle route.
    pub fn run(&mut self, method: MethodId, support: Option<&[usize]>) -> MethodRun {
        let p = self.x.ncols();
        match method.route() {
            Route::Full => self.wald(method, (0..p).collect()),
            Route::Oracle => match support {
                Some(s) => self.wald(method, s.to_vec()),
                None => MethodRun::failed(method, Vec::new(), None, FailureCode::Other),
            },
            Route::Split => self.split(method),
            Route::Posi | Route::Exact => self.selective(method),
        }
    }

    fn wald(&mut self, method: MethodId, model: Vec<usize>) -> MethodRun {
        match ols_fit(self.x, self.y, &model) {
            Ok(fit) => MethodRun {
                method,
                intervals: wald_ci(&fit, self.settings.alpha).into_iter().map(Ok).collect(),
                model,
                lambda: None,
                prediction_fit: Some(fit),
                failure: None,
            },
            Err(e) => MethodRun::failed(method, model, None, FailureCode::from_error(&e)),
        }
    }

    fn split(&mut self, method: MethodId) -> MethodRun {
        let sel = LassoSelector { adaptive: method.is_adaptive(), tuning: Tuning::Cv { folds: self.settings.cv_folds } };
        let stream = if method.is_adaptive() { Stream::SplitAlasso } else { Stream::SplitLasso };
        let mut rng = stream_rng(self.seed, stream);
        let res = match split_inference(self.x, self.y, &sel, self.settings.alpha, &mut rng) {
            Ok(r) => r,
            Err(e) => return MethodRun::failed(method, Vec::new(), None, FailureCode::from_error(&e)),
        };
        let failure = if !res.selection.converged() {
            Some(FailureCode::NonConverged)
        } else if res.model().is_empty() {
            Some(FailureCode::NoSelection)
        } else {
            None
        };
        MethodRun {
            method,
            model: res.model().to_vec(),
            lambda: Some(res.selection.lambda),
            intervals: if failure.is_none() { res.intervals.into_iter().map(Ok).collect() } else { Vec::new() },
            prediction_fit: Some(res.refit),
            failure,
        }
    }

    fn selective(&mut self, method: MethodId) -> MethodRun {
        let neg = matches!(method, MethodId::LassoNegSi | MethodId::AlassoNegSi);
        let sel = match self.tuned_selection(method.is_adaptive(), neg) {
            Ok(s) => s,
            Err(e) => return MethodRun::failed(method, Vec::new(), None, FailureCode::from_error(&e)),
        };
        let model = sel.active_set.clone();
        let lambda = Some(sel.lambda);
        if !sel.converged() {
            return MethodRun::failed(method, model, lambda, FailureCode::NonConverged);
        }
        if model.is_empty() {
            return MethodRun { prediction_fit: ols_fit(self.x, self.y, &[]).ok(), ..MethodRun::failed(method, model, lambda, FailureCode::NoSelection) };
        }
        let Some(refit) = sel.refit.clone() else {
            return MethodRun::failed(method, model, lambda, FailureCode::RankDeficient);
        };
        let intervals = match method.route() {
            Route::Posi => self
                .full_sigma()
                .and_then(|(sigma, df)| self.posi().map(|k| (sigma, df, k)))
                .map(|(sigma, df, k)| posi_ci(&refit.clone().with_residual_sd(sigma, Some(df)), &k).into_iter().map(Ok).collect()),
            _ => {
                let fit = sel.fit.as_ref().expect("penalized selection");
                let (x, y, alpha, exact) = (self.x, self.y, self.settings.alpha, self.settings.exact);
                self.full_sigma().and_then(|(sigma, _)| selective_ci_exact(x, y, fit, sigma, alpha, exact))
            }
        };
        match intervals {
            Ok(intervals) => MethodRun { method, model, lambda, prediction_fit: Some(refit), intervals, failure: None },
            Err(e) => MethodRun { prediction_fit: Some(refit), ..MethodRun::failed(method, model, lambda, FailureCode::from_error(&e)) },
        }
    }
}

fn outcome_from_interval(ci: &SelectiveInterval, target: Option<f64>) -> VariableOutcome {
    VariableOutcome {
        variable: ci.variable,
        selected: true,
        estimate: Some(ci.estimate),
        lower: Some(ci.lower),
        upper: Some(ci.upper),
        p_value: Some(ci.p_value),
        target,
        covered: target.map(|t| ci.covers(t)),
        excludes_zero: Some(ci.excludes_zero()),
        width: Some(ci.width()),
        flag_infinite: ci.flag_infinite,
        flag_excludes_estimate: ci.flag_excludes_estimate,
        failure: None,
    }
}

/// Scores a method run against the submodel targets of the true model.
fn score(run: MethodRun, data: &Dataset) -> MethodIteration {
    let p = data.x_std.ncols();
    let targets: Option<SubmodelTarget> = submodel_target(&data.sigma_true, &data.beta_true, &run.model).ok();
    let mut outcomes: Vec<VariableOutcome> = (0..p).map(VariableOutcome::not_selected).collect();
    let mut failure = run.failure;
    let mut intervals = run.intervals.into_iter();
    for (k, &j) in run.model.iter().enumerate() {
        let target = targets.as_ref().map(|t| t.targets[k]);
        outcomes[j] = match intervals.next() {
            Some(Ok(ci)) => outcome_from_interval(&ci, target),
            Some(Err(e)) => {
                let code = FailureCode::from_error(&e);
                failure.get_or_insert(code);
                VariableOutcome::unavailable(j, target, code)
            }
            None => VariableOutcome::unavailable(j, target, run.failure.unwrap_or(FailureCode::Other)),
        };
    }
    MethodIteration {
        method: run.method,
        validation_r2: run.prediction_fit.as_ref().and_then(|f| validation_r2(&data.y_valid, &f.predict(&data.x_std))),
        model: run.model,
        lambda: run.lambda,
        failure,
        outcomes,
    }
}

/// Runs `methods` on the dataset of `(design, master_seed, iteration)`. Failures
/// are recorded as outcome codes; the call itself does not fail.
pub fn run_iteration(design: &SimulationDesign, methods: &[MethodId], settings: &RunSettings, master_seed: u64, iteration: usize) -> IterationRecord {
    let scenario_id = design.scenario.id();
    let seed = iteration_seed(master_seed, &scenario_id, iteration);
    let p = design.scenario.p();
    let mut data_rng = stream_rng(seed, Stream::Data);
    let data = match sample_dataset(design, &mut data_rng) {
        Ok(d) => d,
        Err(e) => {
            let code = FailureCode::from_error(&e);
            let failed = |m: MethodId| MethodIteration {
                method: m,
                model: Vec::new(),
                lambda: None,
                validation_r2: None,
                failure: Some(code),
                outcomes: (0..p).map(VariableOutcome::not_selected).collect(),
            };
            return IterationRecord {
                scenario_id,
                iteration,
                seed,
                methods: methods.iter().map(|&m| failed(m)).collect(),
                timings: methods.iter().map(|&m| (m, Duration::ZERO)).collect(),
            };
        }
    };
    let support = design.true_support();
    let mut session = Session::new(&data.x_std, &data.y, *settings, seed);
    let mut results = Vec::with_capacity(methods.len());
    let mut timings = Vec::with_capacity(methods.len());
    for &m in methods {
        let start = Instant::now();
        let run = session.run(m, Some(&support));
        timings.push((m, start.elapsed()));
        results.push(score(run, &data));
    }
    IterationRecord { scenario_id, iteration, seed, methods: results, timings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::Scenario;

    fn design(corr: &str, coef: &str, r2: f64, opv: usize) -> SimulationDesign {
        SimulationDesign::resolve(&Scenario {
            setup: Setup::Toy,
            correlation: corr.into(),
            coefficients: coef.into(),
            target_r2: r2,
            obs_per_variable: opv,
        })
        .unwrap()
    }

    #[test]
    fn oracle_model_is_true_support() {
        let d = design("correlated", "v1", 0.5, 10);
        let s = RunSettings::for_setup(Setup::Toy, 0.1);
        for it in 0..5 {
            let r = run_iteration(&d, &[MethodId::Oracle], &s, 3, it);
            assert_eq!(r.methods[0].model, vec![0]);
            assert_eq!(r.methods[0].outcomes.len(), 4);
        }
    }

    #[test]
    fn full_model_at_small_n_has_four_intervals() {
        let d = design("uncorrelated", "v12", 0.5, 5);
        let r = run_iteration(&d, &[MethodId::Full], &RunSettings::for_setup(Setup::Toy, 0.1), 1, 0);
        assert_eq!(r.methods[0].outcomes.iter().filter(|o| o.has_interval()).count(), 4);
    }

    #[test]
    fn iterations_are_deterministic() {
        let d = design("blocks_2_2", "v13", 0.8, 10);
        let s = RunSettings::for_setup(Setup::Toy, 0.1);
        let a = run_iteration(&d, &MethodId::ALL, &s, 42, 7);
        let b = run_iteration(&d, &MethodId::ALL, &s, 42, 7);
        assert_eq!(a.methods, b.methods);
        assert_eq!(a.seed, b.seed);
        let c = run_iteration(&d, &[MethodId::LassoCvSi, MethodId::Full], &s, 42, 7);
        // A method's result does not depend on which other methods ran.
        assert_eq!(c.methods[0], a.methods[4]);
        assert_eq!(c.methods[1], a.methods[0]);
    }
}
