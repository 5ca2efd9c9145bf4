//! Confidence intervals after (or without) selection.

mod exact;
mod ols;
mod polyhedral;
mod posi;
mod split;

pub use exact::{selective_ci_exact, ExactOptions, DEFAULT_GRID_POINTS, DEFAULT_GRID_RANGE};
pub use ols::{ols_fit, wald_ci, OlsFit};
pub use polyhedral::{polyhedral_constraints, truncation_interval, PolyhedralEvent};
pub use posi::{posi_ci, posi_constant, PosiConstant, MAX_ENUMERATION_P};
pub use split::{split_inference, split_rows, SplitResult};

/// Procedure that produced an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InferenceKind {
    Wald,
    Exact,
    Posi,
}

impl InferenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InferenceKind::Wald => "wald",
            InferenceKind::Exact => "exact",
            InferenceKind::Posi => "posi",
        }
    }
}

/// Interval for one selected variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveInterval {
    pub variable: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_value: f64,
    /// An endpoint sits on the search-grid boundary; the interval is treated as unbounded.
    pub flag_infinite: bool,
    pub flag_excludes_estimate: bool,
    pub method: InferenceKind,
}

impl SelectiveInterval {
    pub(crate) fn new(variable: usize, estimate: f64, lower: f64, upper: f64, p_value: f64, method: InferenceKind) -> Self {
        Self {
            variable,
            estimate,
            lower,
            upper,
            p_value,
            flag_infinite: false,
            flag_excludes_estimate: !(lower <= estimate && estimate <= upper),
            method,
        }
    }

    /// `upper − lower`, or infinity for grid-boundary intervals.
    pub fn width(&self) -> f64 {
        if self.flag_infinite {
            f64::INFINITY
        } else {
            self.upper - self.lower
        }
    }

    pub fn is_unstable(&self) -> bool {
        self.flag_infinite || self.flag_excludes_estimate
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn excludes_zero(&self) -> bool {
        !self.covers(0.0)
    }
}
