//! Model selection procedures: penalized fit at a tuned λ, or a fixed model.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::inference::{ols_fit, OlsFit};
use crate::lasso::{self, rescale_for_weights, LassoProblem, PenalizedFit};
use crate::linalg;
use crate::tuning::{self, TuningMethod, TuningResult};

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub method: String,
    pub lambda: f64,
    pub active_set: Vec<usize>,
    pub signs: Vec<f64>,
    /// Penalized fit; `None` for procedures without a penalty.
    pub fit: Option<PenalizedFit>,
    pub tuning: Option<TuningResult>,
    /// OLS refit on the active set using the selection data, when it exists.
    pub refit: Option<OlsFit>,
}

impl SelectionResult {
    pub fn weights(&self) -> Option<&DVector<f64>> {
        self.fit.as_ref().map(|f| &f.weights)
    }

    pub fn converged(&self) -> bool {
        self.fit.as_ref().is_none_or(|f| f.converged)
    }
}

pub trait Selector: Send + Sync {
    fn name(&self) -> String;
    fn select(&self, x: &DMatrix<f64>, y: &DVector<f64>, rng: &mut dyn RngCore) -> Result<SelectionResult>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tuning {
    Cv { folds: usize },
    Negahban { n_mc: usize },
}

/// Lasso (or adaptive Lasso with OLS-based weights) at a tuned λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LassoSelector {
    pub adaptive: bool,
    pub tuning: Tuning,
}

impl LassoSelector {
    pub fn lasso_cv() -> Self {
        Self { adaptive: false, tuning: Tuning::Cv { folds: tuning::DEFAULT_FOLDS } }
    }

    pub fn alasso_cv() -> Self {
        Self { adaptive: true, tuning: Tuning::Cv { folds: tuning::DEFAULT_FOLDS } }
    }

    pub fn lasso_neg() -> Self {
        Self { adaptive: false, tuning: Tuning::Negahban { n_mc: tuning::DEFAULT_NEGAHBAN_MC } }
    }

    pub fn alasso_neg() -> Self {
        Self { adaptive: true, tuning: Tuning::Negahban { n_mc: tuning::DEFAULT_NEGAHBAN_MC } }
    }

    /// Selection with the λ already known.
    pub fn select_at(&self, x: &DMatrix<f64>, y: &DVector<f64>, weights: &DVector<f64>, tuning: TuningResult) -> Result<SelectionResult> {
        let fit = LassoProblem::new(x, y)?.fit(tuning.lambda, weights, None)?;
        let refit = refit_if_possible(x, y, &fit.active_set);
        Ok(SelectionResult {
            method: self.name(),
            lambda: tuning.lambda,
            active_set: fit.active_set.clone(),
            signs: fit.signs.clone(),
            fit: Some(fit),
            tuning: Some(tuning),
            refit,
        })
    }

    pub fn weights_for(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        if self.adaptive {
            lasso::adaptive_weights(x, y)
        } else {
            Ok(DVector::repeat(x.ncols(), 1.0))
        }
    }
}

impl Selector for LassoSelector {
    fn name(&self) -> String {
        let base = if self.adaptive { "ALasso" } else { "Lasso" };
        let tune = match self.tuning {
            Tuning::Cv { .. } => "CV",
            Tuning::Negahban { .. } => "Neg",
        };
        format!("{base}-{tune}")
    }

    fn select(&self, x: &DMatrix<f64>, y: &DVector<f64>, rng: &mut dyn RngCore) -> Result<SelectionResult> {
        let weights = self.weights_for(x, y)?;
        let tuning = match self.tuning {
            Tuning::Cv { folds } => tuning::cv_lambda(x, y, &weights, folds, rng)?,
            Tuning::Negahban { n_mc } => {
                let (sigma, _) = full_model_sigma(x, y)?;
                let mut xt = rescale_for_weights(x, &weights);
                linalg::center_columns(&mut xt);
                tuning::negahban_lambda(&xt, sigma, n_mc, rng)?
            }
        };
        debug_assert!(matches!(
            (self.tuning, tuning.method),
            (Tuning::Cv { .. }, TuningMethod::Cv) | (Tuning::Negahban { .. }, TuningMethod::Negahban)
        ));
        self.select_at(x, y, &weights, tuning)
    }
}

/// Always returns the same model (Full, Oracle, or tests).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedSelector {
    pub name: String,
    pub model: Vec<usize>,
}

impl Selector for FixedSelector {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn select(&self, x: &DMatrix<f64>, y: &DVector<f64>, _rng: &mut dyn RngCore) -> Result<SelectionResult> {
        if let Some(&j) = self.model.iter().find(|&&j| j >= x.ncols()) {
            return Err(Error::InvalidInput(format!("model index {j} out of range")));
        }
        let refit = refit_if_possible(x, y, &self.model);
        let signs = match &refit {
            Some(r) => r.coefficients.iter().map(|b| b.signum()).collect(),
            None => vec![0.0; self.model.len()],
        };
        Ok(SelectionResult {
            method: self.name.clone(),
            lambda: 0.0,
            active_set: self.model.clone(),
            signs,
            fit: None,
            tuning: None,
            refit,
        })
    }
}

fn refit_if_possible(x: &DMatrix<f64>, y: &DVector<f64>, model: &[usize]) -> Option<OlsFit> {
    ols_fit(x, y, model).ok()
}

/// Residual SD of the full least-squares model and its degrees of freedom `n − p − 1`.
pub fn full_model_sigma(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, f64)> {
    let all: Vec<usize> = (0..x.ncols()).collect();
    let fit = ols_fit(x, y, &all)?;
    Ok((fit.residual_sd, fit.df.unwrap_or(f64::INFINITY)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn data(seed: u64, n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = linalg::standardize(&DMatrix::from_fn(n, 4, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap().x;
        let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 0)] + rng.sample::<f64, _>(StandardNormal));
        (x, y)
    }

    #[test]
    fn names() {
        assert_eq!(LassoSelector::lasso_cv().name(), "Lasso-CV");
        assert_eq!(LassoSelector::alasso_neg().name(), "ALasso-Neg");
    }

    #[test]
    fn strong_signal_is_selected_by_every_variant() {
        let (x, y) = data(4, 80);
        for sel in [LassoSelector::lasso_cv(), LassoSelector::alasso_cv(), LassoSelector::lasso_neg(), LassoSelector::alasso_neg()] {
            let r = sel.select(&x, &y, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert!(r.active_set.contains(&0), "{}", sel.name());
            assert_eq!(r.signs[r.active_set.iter().position(|&j| j == 0).unwrap()], 1.0);
            assert!(r.refit.is_some());
        }
    }

    #[test]
    fn fixed_selector_returns_its_model() {
        let (x, y) = data(5, 30);
        let r = FixedSelector { name: "Oracle".into(), model: vec![0] }
            .select(&x, &y, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(r.active_set, vec![0]);
        assert!(r.converged());
    }
}
