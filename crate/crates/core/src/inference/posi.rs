//! Simultaneous (PoSI) multiplier over all submodels by Monte Carlo.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use super::ols::OlsFit;
use super::{InferenceKind, SelectiveInterval};
use crate::error::{Error, Result};
use crate::linalg;
use crate::normal;

/// Largest number of predictors for which all submodels are enumerated.
pub const MAX_ENUMERATION_P: usize = 20;
/// Contrasts multiplied against the Monte-Carlo draws at a time.
const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub struct PosiConstant {
    pub k: f64,
    /// Monte-Carlo estimate before it was clamped into the Scheffé sandwich.
    pub k_raw: f64,
    pub alpha: f64,
    pub model_space: usize,
    pub n_mc: usize,
    pub df: Option<f64>,
    pub rank: usize,
    /// Sorted simulated maxima, used for p-values.
    pub max_stats: Vec<f64>,
}

impl PosiConstant {
    /// `z` / `t` quantile lower limit and Scheffé upper limit.
    pub fn sandwich(rank: usize, df: Option<f64>, alpha: f64) -> (f64, f64) {
        (normal::t_quantile(1.0 - alpha / 2.0, df), normal::scheffe_bound(rank, df, alpha))
    }

    /// Share of simulated maxima at or above `t`.
    pub fn tail_probability(&self, t: f64) -> f64 {
        let below = self.max_stats.partition_point(|&m| m < t);
        (self.max_stats.len() - below) as f64 / self.max_stats.len() as f64
    }
}

/// Unit contrasts `u_{j,M}` for all nonempty `M` with `|M| ≤ max_size`, as columns
/// in coordinates of an orthonormal basis of `col(X)`.
fn contrasts(r: &DMatrix<f64>, max_size: usize) -> DMatrix<f64> {
    let p = r.ncols();
    let mut cols: Vec<f64> = Vec::new();
    let mut count = 0;
    for mask in 1u32..(1u32 << p) {
        let size = mask.count_ones() as usize;
        if size > max_size {
            continue;
        }
        let model: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        let rm = r.select_columns(&model);
        let Some(chol) = (rm.transpose() * &rm).cholesky() else { continue };
        let rows = &rm * chol.inverse();
        for k in 0..size {
            let u = rows.column(k);
            let norm = u.norm();
            if norm > 0.0 {
                cols.extend(u.iter().map(|v| v / norm));
                count += 1;
            }
        }
    }
    DMatrix::from_vec(p, count, cols)
}

/// PoSI multiplier for the centered design `x`. `df = None` treats σ as known.
pub fn posi_constant<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    alpha: f64,
    max_size: Option<usize>,
    df: Option<f64>,
    n_mc: usize,
    rng: &mut R,
) -> Result<PosiConstant> {
    let p = x.ncols();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n_mc == 0 {
        return Err(Error::Config("PoSI needs at least one Monte-Carlo draw".into()));
    }
    if let Some(d) = df {
        if !(d > 0.0) {
            return Err(Error::Config(format!("PoSI degrees of freedom must be positive, got {d}")));
        }
    }
    let max_size = max_size.unwrap_or(p).min(p);
    if max_size == 0 {
        return Err(Error::Config("PoSI model space must allow at least one variable".into()));
    }
    if p > MAX_ENUMERATION_P {
        return Err(Error::Resource(format!(
            "{p} predictors exceed the enumeration cap of {MAX_ENUMERATION_P}; reduce the model space"
        )));
    }
    let mut xc = x.clone();
    linalg::center_columns(&mut xc);
    let bad = linalg::collinear_columns(&xc);
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    let r = xc.qr().r();
    let u = contrasts(&r, max_size);

    // Radial factors first, then the Gaussian draws coordinate by coordinate so
    // that designs sharing leading columns share random numbers.
    let radial: Vec<f64> = match df {
        None => vec![1.0; n_mc],
        Some(d) => {
            let chi = ChiSquared::new(d).map_err(|e| Error::Config(e.to_string()))?;
            (0..n_mc).map(|_| (chi.sample(rng) / d).sqrt()).collect()
        }
    };
    let mut z = DMatrix::zeros(p, n_mc);
    for k in 0..p {
        for i in 0..n_mc {
            z[(k, i)] = rng.sample::<f64, _>(StandardNormal);
        }
    }

    let mut maxima = vec![0.0f64; n_mc];
    let n_con = u.ncols();
    let mut start = 0;
    while start < n_con {
        let len = CHUNK.min(n_con - start);
        let block = u.columns(start, len);
        let proj = block.transpose() * &z;
        for (i, col) in proj.column_iter().enumerate() {
            let m = col.amax();
            if m > maxima[i] {
                maxima[i] = m;
            }
        }
        start += len;
    }
    for (m, r) in maxima.iter_mut().zip(&radial) {
        *m /= r;
    }
    maxima.sort_by(f64::total_cmp);
    let idx = ((1.0 - alpha) * n_mc as f64).ceil() as usize;
    let k_raw = maxima[idx.clamp(1, n_mc) - 1];
    let (lo, hi) = PosiConstant::sandwich(p, df, alpha);
    Ok(PosiConstant {
        k: k_raw.clamp(lo, hi),
        k_raw,
        alpha,
        model_space: max_size,
        n_mc,
        df,
        rank: p,
        max_stats: maxima,
    })
}

/// `β̂_j ± K·SE_j` for every variable of the refit.
pub fn posi_ci(fit: &OlsFit, k: &PosiConstant) -> Vec<SelectiveInterval> {
    fit.model
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let est = fit.coefficients[i];
            let se = fit.std_errors[i];
            let t = (est / se).abs();
            let p = if t <= k.k { 1.0 } else { k.tail_probability(t) };
            SelectiveInterval::new(j, est, est - k.k * se, est + k.k * se, p, InferenceKind::Posi)
        })
        .collect()
}

/// Convenience: orthonormal `n × p` design with centered columns.
#[cfg(test)]
fn orthonormal_design(n: usize, p: usize) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(n, p, |i, j| ((i + 1) as f64 * (j + 1) as f64 * 0.7).sin());
    let mut c = raw;
    linalg::center_columns(&mut c);
    c.qr().q()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use nalgebra::DVector;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_contrast_is_normal_quantile() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 2.0, -2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = posi_constant(&x, 0.1, None, None, 200_000, &mut rng).unwrap();
        assert!((k.k_raw - 1.6449).abs() < 0.01, "{}", k.k_raw);
    }

    #[test]
    fn contrast_count() {
        let x = orthonormal_design(12, 4);
        let r = x.qr().r();
        assert_eq!(contrasts(&r, 4).ncols(), 4 * 8);
        assert_eq!(contrasts(&r, 1).ncols(), 4);
    }

    #[test]
    fn orthogonal_design_contrasts_are_coordinates() {
        // With orthonormal columns every u_{j,M} is ±e_j, so K is the max-|Z| quantile.
        let x = orthonormal_design(20, 3);
        let r = x.qr().r();
        let u = contrasts(&r, 3);
        for col in u.column_iter() {
            assert!((col.amax() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_is_nondecreasing_in_nested_designs() {
        let full = orthonormal_design(30, 6);
        let mut last = 0.0;
        for p in 1..=6 {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let k = posi_constant(&full.columns(0, p).into_owned(), 0.1, None, None, 2000, &mut rng).unwrap();
            assert!(k.k_raw >= last, "p = {p}: {} < {last}", k.k_raw);
            last = k.k_raw;
        }
    }

    #[test]
    fn enumeration_cap() {
        let x = DMatrix::from_fn(30, 21, |i, j| ((i * 31 + j * 17) % 13) as f64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(posi_constant(&x, 0.1, None, None, 10, &mut rng), Err(Error::Resource(_))));
    }

    #[test]
    fn interval_from_constant() {
        let fit = OlsFit {
            model: vec![0],
            coefficients: DVector::from_vec(vec![1.0]),
            std_errors: DVector::from_vec(vec![0.4]),
            residual_sd: 0.4,
            df: None,
            intercept: 0.0,
            gram_inverse: DMatrix::identity(1, 1),
        };
        let k = PosiConstant { k: 2.0, k_raw: 2.0, alpha: 0.1, model_space: 1, n_mc: 4, df: None, rank: 1, max_stats: vec![1.0, 2.0, 2.4, 3.0] };
        let ci = &posi_ci(&fit, &k)[0];
        assert!((ci.lower - 0.2).abs() < 1e-12 && (ci.upper - 1.8).abs() < 1e-12);
        assert_eq!(ci.p_value, 0.25);
    }
}
