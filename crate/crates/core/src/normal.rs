//! Gaussian tail arithmetic that stays accurate far out in the tails.
//!
//! Masses of intervals are handled on the log scale through the scaled
//! complementary error function `erfcx(x) = exp(x²)·erfc(x)`, so ratios of
//! tail probabilities never go through `1 − Φ` subtraction or underflow.

use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use libm::erfc;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Beyond this argument `erfc` underflows and `exp(x²)` overflows; switch to the
/// asymptotic expansion. In standard-normal units this is ~36.8 SDs.
const ERFCX_ASYMPTOTIC: f64 = 26.0;

/// Scaled complementary error function for `x ≥ 0`.
pub fn erfcx(x: f64) -> f64 {
    debug_assert!(x >= 0.0 || x.is_nan());
    if x < ERFCX_ASYMPTOTIC {
        (x * x).exp() * erfc(x)
    } else if x.is_infinite() {
        0.0
    } else {
        // 1/(x√π) · Σ (−1)^k (2k−1)!! / (2x²)^k
        let t = 1.0 / (2.0 * x * x);
        let series = 1.0 - t * (1.0 - 3.0 * t * (1.0 - 5.0 * t * (1.0 - 7.0 * t * (1.0 - 9.0 * t))));
        FRAC_1_SQRT_PI / x * series
    }
}

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `log P(l ≤ Z ≤ u)` for standard normal `Z`, `l < u` (infinite ends allowed).
pub fn log_gauss_mass(l: f64, u: f64) -> f64 {
    if !(l < u) {
        return f64::NEG_INFINITY;
    }
    if l >= 0.0 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let head = erfcx(l * s);
        let tail = if u.is_infinite() {
            0.0
        } else {
            (-(u - l) * (u + l) * 0.5).exp() * erfcx(u * s)
        };
        (0.5f64).ln() - 0.5 * l * l + (head - tail).ln()
    } else if u <= 0.0 {
        log_gauss_mass(-u, -l)
    } else {
        (1.0 - norm_sf(u) - norm_cdf(l)).ln()
    }
}

/// CDF at `z` of `N(mean, sd²)` truncated to `[a, b]`; `z` is clamped into the support.
pub fn truncated_normal_cdf(z: f64, mean: f64, sd: f64, a: f64, b: f64) -> f64 {
    let lo = (a - mean) / sd;
    let hi = (b - mean) / sd;
    let zz = ((z.clamp(a, b)) - mean) / sd;
    let denom = log_gauss_mass(lo, hi);
    if !denom.is_finite() {
        return f64::NAN;
    }
    if zz <= lo {
        return 0.0;
    }
    if zz >= hi {
        return 1.0;
    }
    // Whichever side has less mass is computed directly to avoid 1 − (≈1).
    let below = log_gauss_mass(lo, zz) - denom;
    if below < (0.5f64).ln() {
        below.exp()
    } else {
        1.0 - (log_gauss_mass(zz, hi) - denom).exp()
    }
}

/// Survival `1 − F` of the truncated normal, computed without cancellation.
pub fn truncated_normal_sf(z: f64, mean: f64, sd: f64, a: f64, b: f64) -> f64 {
    let lo = (a - mean) / sd;
    let hi = (b - mean) / sd;
    let zz = ((z.clamp(a, b)) - mean) / sd;
    let denom = log_gauss_mass(lo, hi);
    if !denom.is_finite() {
        return f64::NAN;
    }
    if zz >= hi {
        return 0.0;
    }
    if zz <= lo {
        return 1.0;
    }
    let above = log_gauss_mass(zz, hi) - denom;
    if above < (0.5f64).ln() {
        above.exp()
    } else {
        1.0 - (log_gauss_mass(lo, zz) - denom).exp()
    }
}

pub fn norm_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Quantile of Student's t; `df = None` means the normal limit.
pub fn t_quantile(p: f64, df: Option<f64>) -> f64 {
    match df {
        None => norm_quantile(p),
        Some(d) => StudentsT::new(0.0, 1.0, d)
            .expect("positive degrees of freedom")
            .inverse_cdf(p),
    }
}

/// Two-sided p-value of a t statistic.
pub fn t_two_sided_p(t: f64, df: Option<f64>) -> f64 {
    let tail = match df {
        None => norm_sf(t.abs()),
        Some(d) => {
            let dist = StudentsT::new(0.0, 1.0, d).expect("positive degrees of freedom");
            dist.sf(t.abs())
        }
    };
    (2.0 * tail).min(1.0)
}

/// `√(d · F_{d,df;1−α})`, or `√(χ²_{d;1−α})` when `df` is infinite.
pub fn scheffe_bound(d: usize, df: Option<f64>, alpha: f64) -> f64 {
    let d_f = d as f64;
    match df {
        None => ChiSquared::new(d_f)
            .expect("positive dimension")
            .inverse_cdf(1.0 - alpha)
            .sqrt(),
        Some(df) => (d_f
            * FisherSnedecor::new(d_f, df)
                .expect("positive degrees of freedom")
                .inverse_cdf(1.0 - alpha))
        .sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfcx_is_continuous_at_the_asymptotic_switch() {
        let below = (ERFCX_ASYMPTOTIC * (1.0 - 1e-12)).powi(2).exp()
            * erfc(ERFCX_ASYMPTOTIC * (1.0 - 1e-12));
        let above = erfcx(ERFCX_ASYMPTOTIC);
        assert!((below / above - 1.0).abs() < 1e-9, "{below} {above}");
    }

    #[test]
    fn erfcx_reference_values() {
        // erfcx(1) = e·erfc(1); erfcx(0) = 1
        assert!((erfcx(0.0) - 1.0).abs() < 1e-15);
        assert!((erfcx(1.0) - 0.427_583_576_155_807).abs() < 1e-13, "{}", erfcx(1.0));
        // large-x asymptote 1/(x√π)
        assert!((erfcx(1e6) * 1e6 / FRAC_1_SQRT_PI - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_mass_matches_direct_difference_in_the_bulk() {
        for &(l, u) in &[(-1.0, 2.0), (0.3, 1.7), (-2.5, -0.1), (-0.2, 0.1), (1.0, f64::INFINITY)] {
            let direct: f64 = norm_cdf(u) - norm_cdf(l);
            assert!((log_gauss_mass(l, u) - direct.ln()).abs() < 1e-12, "{l} {u}");
        }
    }

    #[test]
    fn log_mass_far_in_the_tail() {
        // log Φ̄(50) ≈ −50²/2 − ln(50√(2π)) + ln(1 − 1/50² + …)
        let x: f64 = 50.0;
        let approx = -0.5 * x * x - (x * (2.0 * std::f64::consts::PI).sqrt()).ln()
            + (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4)).ln();
        assert!((log_gauss_mass(x, f64::INFINITY) - approx).abs() < 1e-9);
        assert_eq!(log_gauss_mass(-f64::INFINITY, -x), log_gauss_mass(x, f64::INFINITY));
    }

    #[test]
    fn truncated_cdf_untruncated_limit() {
        let f = truncated_normal_cdf(0.5, 0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY);
        assert!((f - norm_cdf(0.5)).abs() < 1e-14);
    }

    #[test]
    fn truncated_cdf_in_extreme_tail_is_finite() {
        // Mean 0, truncation [100, 101], z = 100.005; oracle from the Mills-ratio series.
        let f = truncated_normal_cdf(100.005, 0.0, 1.0, 100.0, 101.0);
        let tail = |x: f64| (-0.5 * (x * x - 1e4)).exp() / x * (1.0 - 1.0 / (x * x) + 3.0 / x.powi(4));
        let (t0, t1, t2) = (tail(100.0), tail(100.005), tail(101.0));
        let expected = (t0 - t1) / (t0 - t2);
        assert!((f - expected).abs() < 1e-9, "{f} vs {expected}");
        let s = truncated_normal_sf(100.005, 0.0, 1.0, 100.0, 101.0);
        assert!((f + s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        assert!((norm_quantile(0.95) - 1.644_853_626_951_472_2).abs() < 1e-9);
        assert!((t_quantile(0.975, Some(10.0)) - 2.228_138_851_986_274).abs() < 1e-8);
        assert!((scheffe_bound(1, None, 0.1) - norm_quantile(0.95)).abs() < 1e-8);
    }
}
