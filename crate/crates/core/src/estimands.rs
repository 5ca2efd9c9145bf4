//! Submodel targets and the selective coverage / power / type-1 aggregates.

use nalgebra::{DMatrix, DVector};

use crate::datagen::Setup;
use crate::error::{Error, Result};
use crate::linalg;

/// Targets below this magnitude count as zero (exact population Σ).
pub const ZERO_TOL_EXACT: f64 = 1e-12;
/// Same for the Monte-Carlo population Σ of the realistic setup.
pub const ZERO_TOL_MONTE_CARLO: f64 = 1e-3;

pub fn zero_tolerance(setup: Setup) -> f64 {
    match setup {
        Setup::Toy => ZERO_TOL_EXACT,
        Setup::Realistic => ZERO_TOL_MONTE_CARLO,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmodelTarget {
    pub model: Vec<usize>,
    pub targets: Vec<f64>,
}

impl SubmodelTarget {
    pub fn target_of(&self, j: usize) -> Option<f64> {
        self.model.iter().position(|&m| m == j).map(|k| self.targets[k])
    }
}

/// Population coefficients of the best linear predictor using only `model`:
/// `Σ_M⁻¹ Σ_{M,·} β`.
pub fn submodel_target(sigma: &DMatrix<f64>, beta: &DVector<f64>, model: &[usize]) -> Result<SubmodelTarget> {
    if model.is_empty() {
        return Ok(SubmodelTarget { model: Vec::new(), targets: Vec::new() });
    }
    let sm = sigma.select_rows(model).select_columns(model);
    let chol = sm.cholesky().ok_or_else(|| Error::InvalidInput(format!("Σ restricted to {model:?} is singular")))?;
    let rhs = sigma.select_rows(model) * beta;
    Ok(SubmodelTarget { model: model.to_vec(), targets: chol.solve(&rhs).iter().copied().collect() })
}

/// Failure classes recorded per method and iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FailureCode {
    NoSelection,
    RankDeficient,
    NonConverged,
    DegenerateInterval,
    EventInconsistency,
    DegenerateData,
    Other,
}

impl FailureCode {
    pub const ALL: [FailureCode; 7] = [
        FailureCode::NoSelection,
        FailureCode::RankDeficient,
        FailureCode::NonConverged,
        FailureCode::DegenerateInterval,
        FailureCode::EventInconsistency,
        FailureCode::DegenerateData,
        FailureCode::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureCode::NoSelection => "no-selection",
            FailureCode::RankDeficient => "rank-deficient",
            FailureCode::NonConverged => "non-converged",
            FailureCode::DegenerateInterval => "degenerate-interval",
            FailureCode::EventInconsistency => "event-inconsistency",
            FailureCode::DegenerateData => "degenerate-data",
            FailureCode::Other => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::RankDeficient { .. } => FailureCode::RankDeficient,
            Error::DegenerateInterval { .. } => FailureCode::DegenerateInterval,
            Error::EventInconsistency(_) => FailureCode::EventInconsistency,
            Error::DegenerateData { .. } => FailureCode::DegenerateData,
            _ => FailureCode::Other,
        }
    }
}

/// Inference result for one variable in one method-iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableOutcome {
    pub variable: usize,
    pub selected: bool,
    pub estimate: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub p_value: Option<f64>,
    pub target: Option<f64>,
    pub covered: Option<bool>,
    pub excludes_zero: Option<bool>,
    pub width: Option<f64>,
    pub flag_infinite: bool,
    pub flag_excludes_estimate: bool,
    pub failure: Option<FailureCode>,
}

impl VariableOutcome {
    pub fn not_selected(variable: usize) -> Self {
        Self {
            variable,
            selected: false,
            estimate: None,
            lower: None,
            upper: None,
            p_value: None,
            target: None,
            covered: None,
            excludes_zero: None,
            width: None,
            flag_infinite: false,
            flag_excludes_estimate: false,
            failure: None,
        }
    }

    /// Selected, but no interval could be formed.
    pub fn unavailable(variable: usize, target: Option<f64>, failure: FailureCode) -> Self {
        Self { selected: true, target, failure: Some(failure), ..Self::not_selected(variable) }
    }

    pub fn has_interval(&self) -> bool {
        self.covered.is_some()
    }

    /// Interval attempted: formed, or failed as degenerate.
    pub fn attempted(&self) -> bool {
        self.has_interval() || self.failure == Some(FailureCode::DegenerateInterval)
    }

    pub fn is_unstable(&self) -> bool {
        self.flag_infinite || self.flag_excludes_estimate || self.failure == Some(FailureCode::DegenerateInterval)
    }

    fn target_is_zero(&self, tol: f64) -> Option<bool> {
        self.target.map(|t| t.abs() <= tol)
    }
}

/// Ratio with an explicit undefined state for empty denominators.
pub fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneralAggregate {
    pub n_intervals: usize,
    pub n_covered: usize,
    pub n_nonzero: usize,
    pub n_nonzero_rejected: usize,
    pub n_zero: usize,
    pub n_zero_rejected: usize,
}

impl GeneralAggregate {
    pub fn coverage(&self) -> Option<f64> {
        ratio(self.n_covered, self.n_intervals)
    }

    pub fn power(&self) -> Option<f64> {
        ratio(self.n_nonzero_rejected, self.n_nonzero)
    }

    pub fn type1(&self) -> Option<f64> {
        ratio(self.n_zero_rejected, self.n_zero)
    }
}

/// Coverage over all available intervals, power over those with nonzero target,
/// type-1 error over those with zero target.
pub fn aggregate_general<'a>(outcomes: impl IntoIterator<Item = &'a VariableOutcome>, zero_tol: f64) -> GeneralAggregate {
    let mut agg = GeneralAggregate::default();
    for o in outcomes {
        let (Some(covered), Some(rejected)) = (o.covered, o.excludes_zero) else { continue };
        agg.n_intervals += 1;
        agg.n_covered += covered as usize;
        match o.target_is_zero(zero_tol) {
            Some(true) => {
                agg.n_zero += 1;
                agg.n_zero_rejected += rejected as usize;
            }
            Some(false) => {
                agg.n_nonzero += 1;
                agg.n_nonzero_rejected += rejected as usize;
            }
            None => {}
        }
    }
    agg
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalAggregate {
    pub variable: usize,
    pub n_selected: usize,
    pub n_sim: usize,
    pub general: GeneralAggregate,
}

impl ConditionalAggregate {
    pub fn selection_freq(&self) -> f64 {
        ratio(self.n_selected, self.n_sim).unwrap_or(0.0)
    }
}

/// Aggregates restricted to iterations in which `variable` was selected.
/// `n_sim` counts all iterations of the method.
pub fn aggregate_conditional<'a>(
    outcomes: impl IntoIterator<Item = &'a VariableOutcome>,
    variable: usize,
    n_sim: usize,
    zero_tol: f64,
) -> ConditionalAggregate {
    let mine: Vec<&VariableOutcome> = outcomes.into_iter().filter(|o| o.variable == variable).collect();
    let n_selected = mine.iter().filter(|o| o.selected).count();
    ConditionalAggregate {
        variable,
        n_selected,
        n_sim,
        general: aggregate_general(mine.into_iter().filter(|o| o.selected), zero_tol),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMetrics {
    pub true_model_freq: Option<f64>,
    pub any_false_positive_freq: Option<f64>,
    pub per_variable_freq: Vec<f64>,
}

pub fn selection_metrics(models: &[Vec<usize>], true_support: &[usize], p: usize) -> SelectionMetrics {
    let n = models.len();
    let mut truth = true_support.to_vec();
    truth.sort_unstable();
    let mut exact = 0;
    let mut fp = 0;
    let mut counts = vec![0usize; p];
    for m in models {
        let mut s = m.clone();
        s.sort_unstable();
        exact += (s == truth) as usize;
        fp += s.iter().any(|j| !truth.contains(j)) as usize;
        for &j in &s {
            counts[j] += 1;
        }
    }
    SelectionMetrics {
        true_model_freq: ratio(exact, n),
        any_false_positive_freq: ratio(fp, n),
        per_variable_freq: counts.iter().map(|&c| ratio(c, n).unwrap_or(0.0)).collect(),
    }
}

/// `1 − Σ(y′ − ŷ)² / Σ(y′ − ȳ′)²`; undefined for constant `y_valid`.
pub fn validation_r2(y_valid: &DVector<f64>, y_hat: &DVector<f64>) -> Option<f64> {
    if y_valid.len() != y_hat.len() || y_valid.is_empty() {
        return None;
    }
    let (yc, _) = linalg::centered(y_valid);
    let tss = yc.norm_squared();
    if !(tss > 0.0) {
        return None;
    }
    Some(1.0 - (y_valid - y_hat).norm_squared() / tss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthSummary {
    pub median_width: Option<f64>,
    pub iqr_width: Option<f64>,
    pub unstable_rate: Option<f64>,
    pub infinite_rate: Option<f64>,
}

/// Median and IQR over finite widths; instability rates over all attempted intervals.
pub fn width_summary<'a>(outcomes: impl IntoIterator<Item = &'a VariableOutcome>) -> WidthSummary {
    let mut finite = Vec::new();
    let (mut attempted, mut unstable, mut infinite) = (0, 0, 0);
    for o in outcomes {
        if !o.attempted() {
            continue;
        }
        attempted += 1;
        unstable += o.is_unstable() as usize;
        infinite += o.flag_infinite as usize;
        if let Some(w) = o.width.filter(|w| w.is_finite()) {
            finite.push(w);
        }
    }
    finite.sort_by(f64::total_cmp);
    let (median_width, iqr_width) = if finite.is_empty() {
        (None, None)
    } else {
        (
            Some(linalg::quantile_sorted(&finite, 0.5)),
            Some(linalg::quantile_sorted(&finite, 0.75) - linalg::quantile_sorted(&finite, 0.25)),
        )
    };
    WidthSummary {
        median_width,
        iqr_width,
        unstable_rate: ratio(unstable, attempted),
        infinite_rate: ratio(infinite, attempted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(variable: usize, target: f64, covered: bool, rejected: bool, width: f64) -> VariableOutcome {
        VariableOutcome {
            variable,
            selected: true,
            estimate: Some(0.0),
            lower: Some(-1.0),
            upper: Some(1.0),
            p_value: Some(0.5),
            target: Some(target),
            covered: Some(covered),
            excludes_zero: Some(rejected),
            width: Some(width),
            flag_infinite: false,
            flag_excludes_estimate: false,
            failure: None,
        }
    }

    #[test]
    fn uncorrelated_target_is_restriction() {
        let t = submodel_target(&DMatrix::identity(4, 4), &DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]), &[0]).unwrap();
        assert_eq!(t.targets, vec![1.0]);
    }

    #[test]
    fn correlated_omitted_variable_target() {
        let sigma = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.8 });
        let beta = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let t = submodel_target(&sigma, &beta, &[1]).unwrap();
        assert!((t.targets[0] - 0.8).abs() < 1e-15);
        let full = submodel_target(&sigma, &beta, &[0, 1, 2, 3]).unwrap();
        for (a, b) in full.targets.iter().zip(beta.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_submatrix_is_an_error() {
        let sigma = DMatrix::from_element(2, 2, 1.0);
        assert!(submodel_target(&sigma, &DVector::from_vec(vec![1.0, 0.0]), &[0, 1]).is_err());
    }

    #[test]
    fn general_aggregates() {
        let o = vec![interval(0, 1.0, true, true, 2.0), interval(1, 1.0, true, false, 2.0)];
        let g = aggregate_general(&o, 1e-12);
        assert_eq!(g.coverage(), Some(1.0));
        assert_eq!(g.power(), Some(0.5));
        assert_eq!(g.type1(), None);
        let w = width_summary(&o);
        assert_eq!((w.median_width, w.iqr_width), (Some(2.0), Some(0.0)));
    }

    #[test]
    fn never_selected_variable_is_undefined() {
        let o = vec![VariableOutcome::not_selected(2), interval(0, 0.0, true, false, 1.0)];
        let c = aggregate_conditional(&o, 2, 1, 1e-12);
        assert_eq!(c.selection_freq(), 0.0);
        assert_eq!(c.general.coverage(), None);
        let c0 = aggregate_conditional(&o, 0, 1, 1e-12);
        assert_eq!(c0.general.type1(), Some(0.0));
    }

    #[test]
    fn selection_metrics_counts() {
        let m = selection_metrics(&[vec![0], vec![0, 2], vec![]], &[0], 3);
        assert_eq!(m.true_model_freq, Some(1.0 / 3.0));
        assert_eq!(m.any_false_positive_freq, Some(1.0 / 3.0));
        assert_eq!(m.per_variable_freq, vec![2.0 / 3.0, 0.0, 1.0 / 3.0]);
        let empty = selection_metrics(&[vec![], vec![]], &[], 2);
        assert_eq!(empty.true_model_freq, Some(1.0));
    }

    #[test]
    fn validation_r2_limits() {
        let y = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        assert_eq!(validation_r2(&y, &y), Some(1.0));
        assert_eq!(validation_r2(&y, &DVector::repeat(3, y.mean())), Some(0.0));
        assert_eq!(validation_r2(&DVector::repeat(3, 1.0), &y), None);
    }
}
