//! Lasso and adaptive Lasso for a Gaussian response by cyclic coordinate descent
//! on the Gram matrix.
//!
//! Objective: `½‖y_c − X_c β‖² + λ Σ w_j |β_j|` where `y_c` and `X_c` are centered
//! on the fitting rows, so the intercept is unpenalized and recovered afterwards.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Coefficients at or below this magnitude are set to zero and leave the active set.
pub const ZERO_THRESHOLD: f64 = 1e-7;
/// Upper bound on adaptive weights.
pub const WEIGHT_CAP: f64 = 1e6;
pub const CD_TOL: f64 = 1e-9;
pub const MAX_SWEEPS: usize = 100_000;
/// Smallest/largest ratio of the default λ grid.
pub const DEFAULT_PATH_RATIO: f64 = 1e-4;
pub const DEFAULT_N_LAMBDA: usize = 100;

#[derive(Debug, Clone)]
pub struct PenalizedFit {
    pub lambda: f64,
    pub weights: DVector<f64>,
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    pub active_set: Vec<usize>,
    pub signs: Vec<f64>,
    pub n_iter: usize,
    pub converged: bool,
}

impl PenalizedFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (x * &self.coefficients).add_scalar(self.intercept)
    }
}

/// Sufficient statistics of one fitting problem, reused along a λ path.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    x_means: DVector<f64>,
    y_mean: f64,
    yty: f64,
}

impl LassoProblem {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::InvalidInput(format!(
                "design has {} rows but response has {}",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() < 2 || x.ncols() == 0 {
            return Err(Error::InvalidInput("need at least two rows and one column".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in design or response".into()));
        }
        let mut xc = x.clone();
        let x_means = linalg::center_columns(&mut xc);
        let (yc, y_mean) = linalg::centered(y);
        Ok(Self {
            gram: xc.transpose() * &xc,
            xty: xc.transpose() * &yc,
            x_means,
            y_mean,
            yty: yc.norm_squared(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.xty.len()
    }

    /// Smallest λ at which the all-zero solution is optimal.
    pub fn lambda_max(&self, weights: &DVector<f64>) -> f64 {
        self.xty
            .iter()
            .zip(weights.iter())
            .map(|(c, w)| c.abs() / w)
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, beta: &DVector<f64>, lambda: f64, weights: &DVector<f64>) -> f64 {
        let quad = 0.5 * (self.yty - 2.0 * self.xty.dot(beta) + beta.dot(&(&self.gram * beta)));
        let pen: f64 = beta.iter().zip(weights.iter()).map(|(b, w)| w * b.abs()).sum();
        quad + lambda * pen
    }

    fn check_args(&self, lambda: f64, weights: &DVector<f64>) -> Result<()> {
        if weights.len() != self.n_features() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} columns",
                weights.len(),
                self.n_features()
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lambda must be finite and ≥ 0, got {lambda}")));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be positive and finite".into()));
        }
        Ok(())
    }

    /// One cyclic pass; returns the largest absolute coordinate change.
    fn sweep(&self, beta: &mut DVector<f64>, grad: &mut DVector<f64>, lambda: f64, weights: &DVector<f64>) -> f64 {
        let mut max_delta: f64 = 0.0;
        for j in 0..beta.len() {
            let gjj = self.gram[(j, j)];
            if gjj <= 0.0 {
                continue;
            }
            let z = grad[j] + gjj * beta[j];
            let new = soft_threshold(z, lambda * weights[j]) / gjj;
            let delta = new - beta[j];
            if delta != 0.0 {
                beta[j] = new;
                grad.axpy(-delta, &self.gram.column(j), 1.0);
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    }

    /// Fits at one λ, optionally warm-started.
    pub fn fit(&self, lambda: f64, weights: &DVector<f64>, warm: Option<&DVector<f64>>) -> Result<PenalizedFit> {
        self.check_args(lambda, weights)?;
        let p = self.n_features();
        let mut beta = warm.cloned().unwrap_or_else(|| DVector::zeros(p));
        let mut grad = &self.xty - &self.gram * &beta;
        let mut n_iter = 0;
        let mut converged = false;
        while n_iter < MAX_SWEEPS {
            n_iter += 1;
            if self.sweep(&mut beta, &mut grad, lambda, weights) <= CD_TOL {
                converged = true;
                break;
            }
        }
        if converged {
            self.polish(&mut beta, lambda, weights);
        }
        for b in beta.iter_mut() {
            if b.abs() <= ZERO_THRESHOLD {
                *b = 0.0;
            }
        }
        let active_set: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        let signs = active_set.iter().map(|&j| beta[j].signum()).collect();
        let intercept = self.y_mean - self.x_means.dot(&beta);
        Ok(PenalizedFit {
            lambda,
            weights: weights.clone(),
            coefficients: beta,
            intercept,
            active_set,
            signs,
            n_iter,
            converged,
        })
    }

    /// Replaces a converged descent solution by the exact solution of the KKT
    /// equations on its active set and signs, when that solution is consistent.
    fn polish(&self, beta: &mut DVector<f64>, lambda: f64, weights: &DVector<f64>) {
        let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j].abs() > ZERO_THRESHOLD).collect();
        if active.is_empty() {
            return;
        }
        let g = self.gram.select_rows(&active).select_columns(&active);
        let Some(chol) = g.cholesky() else { return };
        let rhs = DVector::from_iterator(
            active.len(),
            active.iter().map(|&j| self.xty[j] - lambda * weights[j] * beta[j].signum()),
        );
        let b = chol.solve(&rhs);
        if active.iter().zip(b.iter()).any(|(&j, v)| v.signum() != beta[j].signum() || v.abs() <= ZERO_THRESHOLD) {
            return;
        }
        let mut cand = DVector::zeros(beta.len());
        for (k, &j) in active.iter().enumerate() {
            cand[j] = b[k];
        }
        let grad = &self.xty - &self.gram * &cand;
        let ok = (0..beta.len()).filter(|j| cand[*j] == 0.0).all(|j| {
            let bound = lambda * weights[j];
            grad[j].abs() <= bound + 1e-9 * bound.max(1.0)
        });
        if ok && self.objective(&cand, lambda, weights) <= self.objective(beta, lambda, weights) + 1e-9 {
            *beta = cand;
        }
    }

    /// Fits along a decreasing λ grid with warm starts.
    pub fn fit_path(&self, lambdas: &[f64], weights: &DVector<f64>) -> Result<Vec<PenalizedFit>> {
        let mut out: Vec<PenalizedFit> = Vec::with_capacity(lambdas.len());
        for &lam in lambdas {
            let fit = self.fit(lam, weights, out.last().map(|f| &f.coefficients))?;
            out.push(fit);
        }
        Ok(out)
    }

    /// Largest violation of the optimality conditions at `beta`.
    pub fn kkt_residual(&self, beta: &DVector<f64>, lambda: f64, weights: &DVector<f64>) -> f64 {
        let grad = &self.xty - &self.gram * beta;
        (0..beta.len())
            .map(|j| {
                let bound = lambda * weights[j];
                if beta[j] != 0.0 {
                    (grad[j] - bound * beta[j].signum()).abs()
                } else {
                    (grad[j].abs() - bound).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub fn fit_lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, weights: &DVector<f64>) -> Result<PenalizedFit> {
    LassoProblem::new(x, y)?.fit(lambda, weights, None)
}

/// Least-squares coefficients of `y` on the columns of `x` (with intercept).
pub fn ols_coefficients(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    if x.nrows() <= x.ncols() {
        return Err(Error::InvalidInput(format!(
            "least squares needs n > p (n = {}, p = {})",
            x.nrows(),
            x.ncols()
        )));
    }
    let mut xc = x.clone();
    linalg::center_columns(&mut xc);
    let (yc, _) = linalg::centered(y);
    let chol = linalg::gram_cholesky(&xc)?;
    Ok(chol.solve(&(xc.transpose() * yc)))
}

/// `w_j = 1/|β̂_j,OLS|`, capped at [`WEIGHT_CAP`].
pub fn adaptive_weights(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(weights_from_pilot(&ols_coefficients(x, y)?))
}

pub fn weights_from_pilot(beta: &DVector<f64>) -> DVector<f64> {
    beta.map(|b| {
        let w = 1.0 / b.abs();
        if w.is_finite() {
            w.min(WEIGHT_CAP)
        } else {
            WEIGHT_CAP
        }
    })
}

/// Column `j` divided by `w_j`. A plain Lasso on the result, with coefficients
/// mapped back by `β_j = β̃_j / w_j`, solves the weighted problem.
pub fn rescale_for_weights(x: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col /= weights[j];
    }
    out
}

/// Log-spaced decreasing grid from `λ_max` down to `ratio · λ_max`.
pub fn lambda_path(problem: &LassoProblem, weights: &DVector<f64>, n_lambda: usize, ratio: f64) -> Result<Vec<f64>> {
    if n_lambda < 2 {
        return Err(Error::Config("lambda path needs at least two values".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("lambda ratio must lie in (0, 1), got {ratio}")));
    }
    let lmax = problem.lambda_max(weights);
    if !(lmax > 0.0) {
        return Err(Error::InvalidInput("response is orthogonal to every column".into()));
    }
    let (hi, lo) = (lmax.ln(), (lmax * ratio).ln());
    let step = (hi - lo) / (n_lambda - 1) as f64;
    let mut grid: Vec<f64> = (0..n_lambda).map(|k| (hi - step * k as f64).exp()).collect();
    grid[0] = lmax;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_problem(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
        let x = linalg::standardize(&raw).unwrap().x;
        let y = DVector::from_fn(n, |i, _| x[(i, 0)] - 0.5 * x[(i, p - 1)] + rng.sample::<f64, _>(StandardNormal));
        (x, y)
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let (x, y) = random_problem(1, 40, 4);
        let fit = fit_lasso(&x, &y, 0.0, &DVector::repeat(4, 1.0)).unwrap();
        let ols = ols_coefficients(&x, &y).unwrap();
        assert!((fit.coefficients - ols).amax() < 1e-9);
    }

    #[test]
    fn lambda_max_gives_empty_model() {
        let (x, y) = random_problem(2, 40, 4);
        let w = DVector::repeat(4, 1.0);
        let prob = LassoProblem::new(&x, &y).unwrap();
        let lmax = prob.lambda_max(&w);
        assert!(prob.fit(lmax, &w, None).unwrap().active_set.is_empty());
        assert!(!prob.fit(lmax * 0.99, &w, None).unwrap().active_set.is_empty());
    }

    #[test]
    fn orthonormal_design_soft_thresholds() {
        // Columns of a centered Hadamard-like design, scaled to unit norm.
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0],
        ) / 2.0;
        let y = DVector::from_vec(vec![3.0, -1.0, 0.5, 2.0]);
        let yc = linalg::centered(&y).0;
        for lambda in [0.0, 0.3, 1.0, 5.0] {
            let fit = fit_lasso(&x, &y, lambda, &DVector::repeat(3, 1.0)).unwrap();
            for j in 0..3 {
                let z = x.column(j).dot(&yc);
                assert!((fit.coefficients[j] - soft_threshold(z, lambda)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adaptive_weights_are_reciprocals_with_cap() {
        let w = weights_from_pilot(&DVector::from_vec(vec![2.0, 0.5, 0.0, -1e-9]));
        assert_eq!(w.as_slice(), &[0.5, 2.0, WEIGHT_CAP, WEIGHT_CAP]);
    }

    #[test]
    fn rescale_with_unit_weights_is_identity() {
        let (x, _) = random_problem(3, 10, 3);
        assert_eq!(rescale_for_weights(&x, &DVector::repeat(3, 1.0)), x);
    }

    #[test]
    fn path_is_log_spaced_and_decreasing() {
        let (x, y) = random_problem(4, 40, 4);
        let w = DVector::repeat(4, 1.0);
        let prob = LassoProblem::new(&x, &y).unwrap();
        let grid = lambda_path(&prob, &w, 100, 1e-3).unwrap();
        assert_eq!(grid.len(), 100);
        assert!(grid.windows(2).all(|g| g[1] < g[0]));
        assert!((grid[0] / grid[99] - 1e3).abs() < 1e-6);
        let fits = prob.fit_path(&grid, &w).unwrap();
        assert!(fits[0].active_set.is_empty());
    }

    #[test]
    fn warm_and_cold_starts_agree() {
        let (x, y) = random_problem(5, 40, 4);
        let w = DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5]);
        let prob = LassoProblem::new(&x, &y).unwrap();
        let grid = lambda_path(&prob, &w, 20, 1e-2).unwrap();
        for (fit, &lam) in prob.fit_path(&grid, &w).unwrap().iter().zip(&grid) {
            let cold = prob.fit(lam, &w, None).unwrap();
            assert!((&fit.coefficients - &cold.coefficients).amax() < 1e-9);
        }
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        let (x, y) = random_problem(6, 10, 2);
        assert!(fit_lasso(&x, &y, -1.0, &DVector::repeat(2, 1.0)).is_err());
        assert!(fit_lasso(&x, &y, 1.0, &DVector::from_vec(vec![1.0, 0.0])).is_err());
        assert!(fit_lasso(&x, &y, 1.0, &DVector::repeat(3, 1.0)).is_err());
    }
}
