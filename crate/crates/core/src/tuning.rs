//! Choice of the penalty level: K-fold cross-validation or the fixed Negahban value.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lasso::{self, LassoProblem};
use crate::linalg;

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_NEGAHBAN_MC: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuningMethod {
    Cv,
    Negahban,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPoint {
    pub lambda: f64,
    pub mean_error: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone)]
pub struct TuningResult {
    pub method: TuningMethod,
    pub lambda: f64,
    pub cv_curve: Option<Vec<CvPoint>>,
}

/// Fold label of every row: a random permutation cut into `k` contiguous blocks
/// whose sizes differ by at most one.
pub fn fold_assignment<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut folds = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        folds[row] = pos * k / n;
    }
    folds
}

/// λ minimising the K-fold mean squared prediction error over the default path of
/// the full data. Fold fits use λ·n_train/n, so that the per-observation penalty
/// matches the full-data fit.
pub fn cv_lambda<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &DVector<f64>,
    k: usize,
    rng: &mut R,
) -> Result<TuningResult> {
    let n = x.nrows();
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {k}")));
    }
    if n < 2 * k {
        return Err(Error::Config(format!("{k}-fold cross-validation needs n ≥ {}, got {n}", 2 * k)));
    }
    let full = LassoProblem::new(x, y)?;
    let grid = lasso::lambda_path(&full, weights, lasso::DEFAULT_N_LAMBDA, lasso::DEFAULT_PATH_RATIO)?;
    let folds = fold_assignment(n, k, rng);
    let mut errors = vec![vec![0.0; k]; grid.len()];
    for f in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
        let xt = linalg::select_rows(x, &train);
        let yt = linalg::select_entries(y, &train);
        let xv = linalg::select_rows(x, &test);
        let yv = linalg::select_entries(y, &test);
        let scale = train.len() as f64 / n as f64;
        let fold_grid: Vec<f64> = grid.iter().map(|l| l * scale).collect();
        let prob = LassoProblem::new(&xt, &yt)?;
        for (g, fit) in prob.fit_path(&fold_grid, weights)?.iter().enumerate() {
            let pred = fit.predict(&xv);
            errors[g][f] = (&yv - pred).norm_squared() / test.len() as f64;
        }
    }
    let curve: Vec<CvPoint> = grid
        .iter()
        .zip(&errors)
        .map(|(&lambda, e)| {
            let mean = e.iter().sum::<f64>() / k as f64;
            let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            CvPoint { lambda, mean_error: mean, std_error: (var / k as f64).sqrt() }
        })
        .collect();
    // The grid is decreasing, so the first minimum is the largest tied λ.
    let mut best = 0;
    for (g, pt) in curve.iter().enumerate() {
        if pt.mean_error < curve[best].mean_error {
            best = g;
        }
    }
    Ok(TuningResult { method: TuningMethod::Cv, lambda: grid[best], cv_curve: Some(curve) })
}

/// Monte-Carlo estimate of `2 E‖Xᵀε‖_∞` for `ε ~ N(0, σ̂² I)`. Does not look at `y`.
pub fn negahban_lambda<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    sigma_hat: f64,
    n_mc: usize,
    rng: &mut R,
) -> Result<TuningResult> {
    if !(sigma_hat > 0.0) || !sigma_hat.is_finite() {
        return Err(Error::InvalidInput(format!("sigma_hat must be positive, got {sigma_hat}")));
    }
    if n_mc == 0 {
        return Err(Error::Config("Negahban λ needs at least one Monte-Carlo draw".into()));
    }
    let n = x.nrows();
    let xt = x.transpose();
    let mut eps = DVector::zeros(n);
    let mut total = 0.0;
    for _ in 0..n_mc {
        for e in eps.iter_mut() {
            *e = rng.sample::<f64, _>(StandardNormal);
        }
        total += (&xt * &eps).amax();
    }
    let lambda = 2.0 * sigma_hat * total / n_mc as f64;
    Ok(TuningResult { method: TuningMethod::Negahban, lambda, cv_curve: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn folds_are_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = fold_assignment(43, 10, &mut rng);
        let mut counts = [0usize; 10];
        for &v in &f {
            counts[v] += 1;
        }
        assert!(counts.iter().all(|&c| c == 4 || c == 5));
        assert_eq!(counts.iter().sum::<usize>(), 43);
    }

    #[test]
    fn negahban_is_linear_in_sigma() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i * 3 + j) as f64).sin());
        let a = negahban_lambda(&x, 1.0, 300, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = negahban_lambda(&x, 2.0, 300, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(b.lambda, 2.0 * a.lambda);
    }

    #[test]
    fn negahban_single_column_half_normal_mean() {
        // ‖x‖² = n ⇒ λ/2 = σ√n E|N(0,1)| = σ√(2n/π).
        let n = 50;
        let x = DMatrix::from_fn(n, 1, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let t = negahban_lambda(&x, 1.5, 100_000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let expected = 1.5 * (2.0 * n as f64 / std::f64::consts::PI).sqrt();
        assert!((t.lambda / 2.0 / expected - 1.0).abs() < 0.02);
    }

    #[test]
    fn cv_requires_enough_rows() {
        let x = DMatrix::from_fn(15, 2, |i, j| (i + j) as f64);
        let y = DVector::from_fn(15, |i, _| i as f64);
        let r = cv_lambda(&x, &y, &DVector::repeat(2, 1.0), 10, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn cv_lambda_is_on_grid_and_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = linalg::standardize(&DMatrix::from_fn(60, 4, |_, _| rng.sample::<f64, _>(StandardNormal))).unwrap().x;
        let y = DVector::from_fn(60, |i, _| x[(i, 0)] + 0.5 * rng.sample::<f64, _>(StandardNormal));
        let w = DVector::repeat(4, 1.0);
        let t = cv_lambda(&x, &y, &w, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let curve = t.cv_curve.unwrap();
        let best = curve.iter().map(|c| c.mean_error).fold(f64::INFINITY, f64::min);
        let chosen = curve.iter().find(|c| c.lambda == t.lambda).unwrap();
        assert_eq!(chosen.mean_error, best);
        let again = cv_lambda(&x, &y, &w, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(again.lambda, t.lambda);
    }
}
