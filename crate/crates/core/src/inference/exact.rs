//! Selective intervals from the truncated-Gaussian pivot of the polyhedral event.

use nalgebra::{DMatrix, DVector};

use super::polyhedral::{polyhedral_constraints, truncation_interval, PolyhedralEvent};
use super::{InferenceKind, SelectiveInterval};
use crate::error::{Error, Result};
use crate::lasso::{rescale_for_weights, PenalizedFit};
use crate::linalg;
use crate::normal::truncated_normal_sf;

/// Half-range of the θ grid in units of the statistic's standard deviation.
pub const DEFAULT_GRID_RANGE: f64 = 1000.0;
pub const DEFAULT_GRID_POINTS: usize = 1000;
const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    pub grid_range: f64,
    pub grid_points: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self { grid_range: DEFAULT_GRID_RANGE, grid_points: DEFAULT_GRID_POINTS }
    }
}

/// Intervals for every variable in `fit.active_set`, conditional on the selected
/// model and signs at the fit's λ, with `sigma` treated as known.
///
/// The outer error covers failures of the event as a whole; a per-variable error
/// marks an interval that could not be formed.
pub fn selective_ci_exact(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    fit: &PenalizedFit,
    sigma: f64,
    alpha: f64,
    options: ExactOptions,
) -> Result<Vec<Result<SelectiveInterval>>> {
    if fit.active_set.is_empty() {
        return Err(Error::InvalidInput("exact inference needs a nonempty active set".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
    }
    let event = polyhedral_constraints(x, fit.lambda, &fit.weights, &fit.active_set, &fit.signs)?;
    event.verify(y)?;
    let mut xt = rescale_for_weights(x, &fit.weights);
    linalg::center_columns(&mut xt);
    let xm = linalg::select_columns(&xt, &fit.active_set);
    let etas = linalg::gram_cholesky(&xm)?.inverse() * xm.transpose();
    let mut out = Vec::with_capacity(fit.active_set.len());
    for (k, &j) in fit.active_set.iter().enumerate() {
        let eta = etas.row(k).transpose();
        let ci = interval_for_contrast(&eta, y, &event, sigma, alpha, options, j)?;
        out.push(ci.map(|c| scale_interval(c, fit.weights[j])));
    }
    Ok(out)
}

fn scale_interval(mut ci: SelectiveInterval, w: f64) -> SelectiveInterval {
    ci.estimate /= w;
    ci.lower /= w;
    ci.upper /= w;
    ci
}

/// Pivot-inversion interval for `ηᵀμ` given the event.
pub(crate) fn interval_for_contrast(
    eta: &DVector<f64>,
    y: &DVector<f64>,
    event: &PolyhedralEvent,
    sigma: f64,
    alpha: f64,
    options: ExactOptions,
    variable: usize,
) -> Result<Result<SelectiveInterval>> {
    let stat = eta.dot(y);
    let sd = sigma * eta.norm();
    let (vlo, vhi) = truncation_interval(eta, y, event)?;
    let surv = |theta: f64| truncated_normal_sf(stat, theta, sd, vlo, vhi);
    let degenerate = || Err(Error::DegenerateInterval { variable });

    let bound = options.grid_range * sd;
    let npts = options.grid_points.max(2);
    let grid: Vec<f64> = (0..npts)
        .map(|k| -bound + 2.0 * bound * k as f64 / (npts - 1) as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&t| surv(t)).collect();
    if vals.iter().any(|v| v.is_nan()) {
        return Ok(degenerate());
    }
    let (lo_target, hi_target) = (alpha / 2.0, 1.0 - alpha / 2.0);
    let first_ok = vals.iter().position(|&v| v >= lo_target);
    let last_ok = vals.iter().rposition(|&v| v <= hi_target);

    let (lower, upper, infinite) = match (first_ok, last_ok) {
        (None, _) => (bound, bound, true),
        (_, None) => (-bound, -bound, true),
        (Some(i1), Some(i2)) => {
            let (lower, lo_inf) = if i1 == 0 {
                (-bound, true)
            } else {
                (bisect(&surv, grid[i1 - 1], grid[i1], lo_target), false)
            };
            let (upper, hi_inf) = if i2 == npts - 1 {
                (bound, true)
            } else {
                (bisect(&surv, grid[i2], grid[i2 + 1], hi_target), false)
            };
            (lower, upper, lo_inf || hi_inf)
        }
    };
    if !(lower <= upper) {
        return Ok(degenerate());
    }
    let p_value = if stat >= 0.0 {
        surv(0.0)
    } else {
        1.0 - surv(0.0)
    };
    if p_value.is_nan() {
        return Ok(degenerate());
    }
    let mut ci = SelectiveInterval::new(variable, stat, lower, upper, p_value.clamp(0.0, 1.0), InferenceKind::Exact);
    ci.flag_infinite = infinite;
    Ok(Ok(ci))
}

/// Root of `f(θ) = target` on `[a, b]` for increasing `f` with `f(a) < target ≤ f(b)`
/// (or the mirror), by bisection.
fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, target: f64) -> f64 {
    let fa_below = f(a) < target;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if (f(mid) < target) == fa_below {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}
