//! Per-(scenario, method) aggregates and their text files.

use std::io::Write;
use std::path::Path;

use super::methods::MethodId;
use super::runner::IterationRecord;
use crate::datagen::Scenario;
use crate::error::Result;
use crate::estimands::{
    aggregate_conditional, aggregate_general, selection_metrics, width_summary, zero_tolerance, ConditionalAggregate,
    FailureCode, GeneralAggregate, WidthSummary,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: MethodId,
    pub n_iter: usize,
    pub general: GeneralAggregate,
    pub conditional: Vec<ConditionalAggregate>,
    pub true_model_freq: Option<f64>,
    pub fp_freq: Option<f64>,
    pub mean_model_size: Option<f64>,
    pub width: WidthSummary,
    /// Share of method-iterations with at least one attempted interval in which
    /// some interval is unstable.
    pub unstable_iter_rate: Option<f64>,
    pub mean_validation_r2: Option<f64>,
    /// Rate of each failure code over method-iterations, in `FailureCode::ALL` order.
    pub failure_rates: Vec<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub scenario: Scenario,
    pub true_support: Vec<usize>,
    pub methods: Vec<MethodSummary>,
}

impl ScenarioSummary {
    pub fn method(&self, id: MethodId) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == id)
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Deterministic fold of iteration records (in iteration order) into aggregates.
pub fn summarize(scenario: &Scenario, true_support: &[usize], methods: &[MethodId], records: &[IterationRecord]) -> ScenarioSummary {
    let p = scenario.p();
    let tol = zero_tolerance(scenario.setup);
    let n_iter = records.len();
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let its: Vec<_> = records.iter().map(|r| &r.methods[k]).collect();
            debug_assert!(its.iter().all(|m| m.method == method));
            let outcomes = || its.iter().flat_map(|m| m.outcomes.iter());
            let models: Vec<Vec<usize>> = its.iter().map(|m| m.model.clone()).collect();
            let sel = selection_metrics(&models, true_support, p);
            let (mut attempted, mut unstable) = (0usize, 0usize);
            for m in &its {
                if m.outcomes.iter().any(|o| o.attempted()) {
                    attempted += 1;
                    unstable += m.outcomes.iter().any(|o| o.attempted() && o.is_unstable()) as usize;
                }
            }
            let failure_rates = FailureCode::ALL
                .iter()
                .map(|&c| {
                    if n_iter == 0 {
                        0.0
                    } else {
                        its.iter().filter(|m| m.failure == Some(c)).count() as f64 / n_iter as f64
                    }
                })
                .collect();
            MethodSummary {
                method,
                n_iter,
                general: aggregate_general(outcomes(), tol),
                conditional: (0..p).map(|j| aggregate_conditional(outcomes(), j, n_iter, tol)).collect(),
                true_model_freq: sel.true_model_freq,
                fp_freq: sel.any_false_positive_freq,
                mean_model_size: mean(models.iter().map(|m| m.len() as f64)),
                width: width_summary(outcomes()),
                unstable_iter_rate: crate::estimands::ratio(unstable, attempted),
                mean_validation_r2: mean(its.iter().filter_map(|m| m.validation_r2)),
                failure_rates,
                total_seconds: records.iter().map(|r| r.timings.get(k).map_or(0.0, |(_, d)| d.as_secs_f64())).sum(),
            }
        })
        .collect();
    ScenarioSummary { scenario: scenario.clone(), true_support: true_support.to_vec(), methods: summaries }
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub const SUMMARY_COLUMNS: [&str; 23] = [
    "scenario",
    "setup",
    "correlation",
    "coefficients",
    "r2",
    "opv",
    "p",
    "n",
    "method",
    "n_iter",
    "n_intervals",
    "coverage",
    "power",
    "type1",
    "true_model_freq",
    "fp_freq",
    "mean_model_size",
    "median_width",
    "iqr_width",
    "unstable_rate",
    "unstable_iter_rate",
    "infinite_rate",
    "mean_validation_r2",
];

pub const CONDITIONAL_COLUMNS: [&str; 13] = [
    "scenario",
    "method",
    "variable",
    "is_true_predictor",
    "n_sim",
    "n_selected",
    "selection_freq",
    "n_intervals",
    "coverage",
    "n_nonzero",
    "power",
    "n_zero",
    "type1",
];

fn summary_header() -> String {
    let mut cols: Vec<String> = SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect();
    cols.extend(FailureCode::ALL.iter().map(|c| format!("rate_{}", c.as_str().replace('-', "_"))));
    cols.join(",")
}

/// Writes `summary.csv` (one row per scenario and method) and
/// `summary_conditional.csv` (one row per scenario, method and variable).
/// Run times go to `timing.csv` so that the first two are reproducible byte for byte.
pub fn write_summaries(dir: &Path, summaries: &[ScenarioSummary]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut main = std::io::BufWriter::new(std::fs::File::create(dir.join("summary.csv"))?);
    let mut cond = std::io::BufWriter::new(std::fs::File::create(dir.join("summary_conditional.csv"))?);
    let mut timing = std::io::BufWriter::new(std::fs::File::create(dir.join("timing.csv"))?);
    writeln!(main, "{}", summary_header())?;
    writeln!(cond, "{}", CONDITIONAL_COLUMNS.join(","))?;
    writeln!(timing, "scenario,method,n_iter,total_seconds,mean_seconds")?;
    for s in summaries {
        let sc = &s.scenario;
        let id = sc.id();
        for m in &s.methods {
            let mut row = vec![
                id.clone(),
                sc.setup.as_str().to_string(),
                sc.correlation.clone(),
                sc.coefficients.clone(),
                sc.target_r2.to_string(),
                sc.obs_per_variable.to_string(),
                sc.p().to_string(),
                sc.n().to_string(),
                m.method.as_str().to_string(),
                m.n_iter.to_string(),
                m.general.n_intervals.to_string(),
                na(m.general.coverage()),
                na(m.general.power()),
                na(m.general.type1()),
                na(m.true_model_freq),
                na(m.fp_freq),
                na(m.mean_model_size),
                na(m.width.median_width),
                na(m.width.iqr_width),
                na(m.width.unstable_rate),
                na(m.unstable_iter_rate),
                na(m.width.infinite_rate),
                na(m.mean_validation_r2),
            ];
            row.extend(m.failure_rates.iter().map(|r| r.to_string()));
            writeln!(main, "{}", row.join(","))?;
            for c in &m.conditional {
                let g = &c.general;
                let row = [
                    id.clone(),
                    m.method.as_str().to_string(),
                    (c.variable + 1).to_string(),
                    (s.true_support.contains(&c.variable) as u8).to_string(),
                    c.n_sim.to_string(),
                    c.n_selected.to_string(),
                    c.selection_freq().to_string(),
                    g.n_intervals.to_string(),
                    na(g.coverage()),
                    g.n_nonzero.to_string(),
                    na(g.power()),
                    g.n_zero.to_string(),
                    na(g.type1()),
                ];
                writeln!(cond, "{}", row.join(","))?;
            }
            let mean_s = if m.n_iter > 0 { m.total_seconds / m.n_iter as f64 } else { 0.0 };
            writeln!(timing, "{id},{},{},{:.6},{:.6}", m.method.as_str(), m.n_iter, m.total_seconds, mean_s)?;
        }
    }
    main.flush()?;
    cond.flush()?;
    timing.flush()?;
    Ok(())
}
