//! Property tests of the solver, the selection event and the interval machinery.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use selinf::estimands::{aggregate_conditional, aggregate_general, VariableOutcome};
use selinf::inference::{polyhedral_constraints, selective_ci_exact, truncation_interval, ExactOptions};
use selinf::lasso::{fit_lasso, rescale_for_weights, LassoProblem};
use selinf::linalg;
use selinf::normal::{truncated_normal_cdf, truncated_normal_sf};

fn instance(seed: u64, n: usize, p: usize, rho: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let x = DMatrix::from_fn(n, p, |i, _| rho * shared[i] + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal));
    let x = linalg::standardize(&x).unwrap().x;
    let y = DVector::from_fn(n, |i, _| 1.5 * x[(i, 0)] - 0.7 * x[(i, p - 1)] + rng.sample::<f64, _>(StandardNormal));
    (x, y)
}

fn lambda_at(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, frac: f64) -> f64 {
    LassoProblem::new(x, y).unwrap().lambda_max(w) * frac
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kkt_holds_at_the_solution(seed in 0u64..10_000, p in 2usize..7, frac in 0.01f64..0.99, rho in 0.0f64..0.9) {
        let (x, y) = instance(seed, 40, p, rho);
        let w = DVector::from_fn(p, |j, _| 0.5 + j as f64 * 0.3);
        let prob = LassoProblem::new(&x, &y).unwrap();
        let lam = prob.lambda_max(&w) * frac;
        let fit = prob.fit(lam, &w, None).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(prob.kkt_residual(&fit.coefficients, lam, &w) <= 1e-6);
    }

    #[test]
    fn column_order_does_not_matter(seed in 0u64..10_000, frac in 0.02f64..0.9) {
        let p = 5;
        let (x, y) = instance(seed, 40, p, 0.4);
        let perm = [3usize, 0, 4, 1, 2];
        let xp = linalg::select_columns(&x, &perm);
        let w = DVector::repeat(p, 1.0);
        let lam = lambda_at(&x, &y, &w, frac);
        let a = fit_lasso(&x, &y, lam, &w).unwrap();
        let b = fit_lasso(&xp, &y, lam, &w).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            prop_assert!((a.coefficients[j] - b.coefficients[k]).abs() <= 1e-8);
        }
        prop_assert!((a.intercept - b.intercept).abs() <= 1e-8);
    }

    #[test]
    fn weighted_fit_equals_rescaled_fit(seed in 0u64..10_000, frac in 0.02f64..0.9, w0 in 0.2f64..5.0, w1 in 0.2f64..5.0) {
        let p = 4;
        let (x, y) = instance(seed, 40, p, 0.3);
        let w = DVector::from_vec(vec![w0, w1, 1.0, 2.5]);
        let lam = lambda_at(&x, &y, &w, frac);
        let direct = fit_lasso(&x, &y, lam, &w).unwrap();
        let xt = rescale_for_weights(&x, &w);
        let plain = fit_lasso(&xt, &y, lam, &DVector::repeat(p, 1.0)).unwrap();
        for j in 0..p {
            prop_assert!((direct.coefficients[j] - plain.coefficients[j] / w[j]).abs() <= 1e-8);
        }
    }

    #[test]
    fn event_membership_matches_refitting(seed in 0u64..10_000, frac in 0.05f64..0.8, scale in 0.01f64..1.0) {
        let p = 4;
        let (x, y) = instance(seed, 30, p, 0.5);
        let w = DVector::from_vec(vec![1.0, 0.7, 1.3, 2.0]);
        let lam = lambda_at(&x, &y, &w, frac);
        let fit = fit_lasso(&x, &y, lam, &w).unwrap();
        prop_assume!(!fit.active_set.is_empty());
        let event = polyhedral_constraints(&x, lam, &w, &fit.active_set, &fit.signs).unwrap();
        prop_assert!(event.contains(&y));

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let y2 = &y + DVector::from_fn(y.len(), |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let slack = &event.b_vector - &event.a_matrix * &y2;
        prop_assume!(slack.iter().all(|s| s.abs() > 1e-6));
        let refit = fit_lasso(&x, &y2, lam, &w).unwrap();
        let same = refit.active_set == fit.active_set && refit.signs == fit.signs;
        prop_assert_eq!(event.contains(&y2), same);
    }

    #[test]
    fn statistic_lies_in_its_truncation_interval(seed in 0u64..10_000, frac in 0.05f64..0.8) {
        let p = 5;
        let (x, y) = instance(seed, 35, p, 0.6);
        let w = DVector::repeat(p, 1.0);
        let lam = lambda_at(&x, &y, &w, frac);
        let fit = fit_lasso(&x, &y, lam, &w).unwrap();
        prop_assume!(!fit.active_set.is_empty());
        let event = polyhedral_constraints(&x, lam, &w, &fit.active_set, &fit.signs).unwrap();
        let mut xc = x.clone();
        linalg::center_columns(&mut xc);
        let xm = linalg::select_columns(&xc, &fit.active_set);
        let etas = linalg::gram_cholesky(&xm).unwrap().inverse() * xm.transpose();
        for k in 0..fit.active_set.len() {
            let eta = etas.row(k).transpose();
            let (lo, hi) = truncation_interval(&eta, &y, &event).unwrap();
            let stat = eta.dot(&y);
            prop_assert!(lo <= stat && stat <= hi, "{lo} {stat} {hi}");
        }
    }

    #[test]
    fn selective_intervals_are_well_formed(seed in 0u64..10_000, frac in 0.05f64..0.8, alpha in 0.02f64..0.3) {
        let p = 4;
        let (x, y) = instance(seed, 40, p, 0.3);
        let w = DVector::from_vec(vec![1.0, 2.0, 0.5, 1.0]);
        let lam = lambda_at(&x, &y, &w, frac);
        let fit = fit_lasso(&x, &y, lam, &w).unwrap();
        prop_assume!(!fit.active_set.is_empty());
        let cis = selective_ci_exact(&x, &y, &fit, 1.0, alpha, ExactOptions::default()).unwrap();
        for ci in cis.into_iter().flatten() {
            prop_assert!(ci.lower <= ci.upper);
            prop_assert!((0.0..=1.0).contains(&ci.p_value));
            if !ci.flag_excludes_estimate {
                prop_assert!(ci.lower <= ci.estimate && ci.estimate <= ci.upper);
            }
            prop_assert_eq!(ci.width().is_infinite(), ci.flag_infinite);
        }
    }

    #[test]
    fn truncated_normal_is_monotone(mean in -5.0f64..5.0, sd in 0.1f64..3.0, a in -10.0f64..0.0, len in 0.01f64..20.0, z1 in 0.0f64..1.0, z2 in 0.0f64..1.0) {
        let b = a + len;
        let (lo, hi) = if z1 < z2 { (z1, z2) } else { (z2, z1) };
        let (za, zb) = (a + lo * len, a + hi * len);
        prop_assert!(truncated_normal_cdf(za, mean, sd, a, b) <= truncated_normal_cdf(zb, mean, sd, a, b) + 1e-12);
        let s = truncated_normal_sf(za, mean, sd, a, b) + truncated_normal_cdf(za, mean, sd, a, b);
        prop_assert!((s - 1.0).abs() < 1e-9);
        // Survival is increasing in the mean.
        prop_assert!(truncated_normal_sf(za, mean, sd, a, b) <= truncated_normal_sf(za, mean + 0.5, sd, a, b) + 1e-12);
    }

    #[test]
    fn conditional_aggregates_add_up_to_the_general_one(
        cells in proptest::collection::vec((0usize..3, any::<bool>(), any::<bool>(), any::<bool>(), prop_oneof![Just(0.0), Just(1.0)]), 1..60)
    ) {
        let outcomes: Vec<VariableOutcome> = cells
            .iter()
            .map(|&(j, selected, covered, rejected, target)| {
                if !selected {
                    return VariableOutcome::not_selected(j);
                }
                VariableOutcome {
                    estimate: Some(0.0),
                    lower: Some(-1.0),
                    upper: Some(1.0),
                    p_value: Some(0.5),
                    target: Some(target),
                    covered: Some(covered),
                    excludes_zero: Some(rejected),
                    width: Some(2.0),
                    ..VariableOutcome::unavailable(j, Some(target), selinf::estimands::FailureCode::Other)
                }
            })
            .map(|mut o| {
                if o.covered.is_some() {
                    o.failure = None;
                }
                o
            })
            .collect();
        let g = aggregate_general(&outcomes, 1e-12);
        prop_assert!(g.n_covered <= g.n_intervals);
        prop_assert_eq!(g.n_zero + g.n_nonzero, g.n_intervals);
        let (mut n_int, mut n_cov, mut n_rej) = (0, 0, 0);
        for j in 0..3 {
            let c = aggregate_conditional(&outcomes, j, outcomes.len(), 1e-12);
            n_int += c.general.n_intervals;
            n_cov += c.general.n_covered;
            n_rej += c.general.n_zero_rejected + c.general.n_nonzero_rejected;
            prop_assert!(c.selection_freq() <= 1.0);
        }
        prop_assert_eq!(n_int, g.n_intervals);
        prop_assert_eq!(n_cov, g.n_covered);
        prop_assert_eq!(n_rej, g.n_zero_rejected + g.n_nonzero_rejected);
    }
}
