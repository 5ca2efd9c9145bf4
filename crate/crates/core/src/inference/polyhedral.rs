//! Selection event of the fixed-λ Lasso as a polyhedron `{y : A y ≤ b}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lasso::rescale_for_weights;
use crate::linalg;

const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct PolyhedralEvent {
    pub a_matrix: DMatrix<f64>,
    pub b_vector: DVector<f64>,
    pub lambda: f64,
    pub weights: DVector<f64>,
    pub model: Vec<usize>,
    pub signs: Vec<f64>,
}

impl PolyhedralEvent {
    /// The unrestricted event (no rows).
    pub fn whole_space(n: usize) -> Self {
        Self {
            a_matrix: DMatrix::zeros(0, n),
            b_vector: DVector::zeros(0),
            lambda: 0.0,
            weights: DVector::zeros(0),
            model: Vec::new(),
            signs: Vec::new(),
        }
    }

    pub fn n_constraints(&self) -> usize {
        self.b_vector.len()
    }

    fn row_tolerance(&self, i: usize, ay: f64) -> f64 {
        FEASIBILITY_TOL * 1f64.max(self.b_vector[i].abs()).max(ay.abs())
    }

    pub fn contains(&self, y: &DVector<f64>) -> bool {
        let ay = &self.a_matrix * y;
        (0..self.n_constraints()).all(|i| ay[i] <= self.b_vector[i])
    }

    /// Checks that `y` lies in the event up to a small relative tolerance.
    pub fn verify(&self, y: &DVector<f64>) -> Result<()> {
        let ay = &self.a_matrix * y;
        for i in 0..self.n_constraints() {
            let excess = ay[i] - self.b_vector[i];
            if excess > self.row_tolerance(i, ay[i]) {
                return Err(Error::EventInconsistency(format!(
                    "constraint {i} violated by {excess:.3e} (model {:?})",
                    self.model
                )));
            }
        }
        Ok(())
    }
}

/// Builds `{M̂ = model, ŝ = signs}` for the Lasso at `lambda` with penalty weights,
/// using the design with columns centered and divided by the weights.
pub fn polyhedral_constraints(
    x: &DMatrix<f64>,
    lambda: f64,
    weights: &DVector<f64>,
    model: &[usize],
    signs: &[f64],
) -> Result<PolyhedralEvent> {
    let (n, p) = x.shape();
    if model.is_empty() {
        return Err(Error::InvalidInput("selection event needs a nonempty model".into()));
    }
    if model.len() != signs.len() {
        return Err(Error::InvalidInput("one sign per selected variable required".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("selection event needs lambda > 0, got {lambda}")));
    }
    let mut xt = rescale_for_weights(x, weights);
    linalg::center_columns(&mut xt);
    let xm = linalg::select_columns(&xt, model);
    let chol = linalg::gram_cholesky(&xm).map_err(|e| match e {
        Error::RankDeficient { columns } => Error::RankDeficient {
            columns: columns.into_iter().map(|k| model[k]).collect(),
        },
        other => other,
    })?;
    let g = chol.inverse();
    let s = DVector::from_column_slice(signs);
    let inactive: Vec<usize> = (0..p).filter(|j| !model.contains(j)).collect();
    let m = model.len();
    let q = inactive.len();
    let mut a = DMatrix::zeros(m + 2 * q, n);
    let mut b = DVector::zeros(m + 2 * q);

    // Active rows: −diag(s) G X_Mᵀ y ≤ −λ diag(s) G s.
    let gxt = &g * xm.transpose();
    let gs = &g * &s;
    for k in 0..m {
        a.row_mut(k).copy_from(&(gxt.row(k) * (-s[k])));
        b[k] = -lambda * s[k] * gs[k];
    }

    if q > 0 {
        // Inactive rows: ±(1/λ) X_{−M}ᵀ (I − P_M) y ≤ 1 ∓ X_{−M}ᵀ X_M G s.
        let xi = linalg::select_columns(&xt, &inactive);
        let proj_resid = xi.transpose() - (xi.transpose() * &xm) * &gxt;
        let shift = xi.transpose() * (&xm * &gs);
        for k in 0..q {
            let row = proj_resid.row(k) / lambda;
            a.row_mut(m + k).copy_from(&row);
            b[m + k] = 1.0 - shift[k];
            a.row_mut(m + q + k).copy_from(&(-row));
            b[m + q + k] = 1.0 + shift[k];
        }
    }
    Ok(PolyhedralEvent {
        a_matrix: a,
        b_vector: b,
        lambda,
        weights: weights.clone(),
        model: model.to_vec(),
        signs: signs.to_vec(),
    })
}

/// Range `[v−, v+]` of `ηᵀy` compatible with the event, holding the component of
/// `y` orthogonal to `η` fixed.
pub fn truncation_interval(eta: &DVector<f64>, y: &DVector<f64>, event: &PolyhedralEvent) -> Result<(f64, f64)> {
    let nn = eta.norm_squared();
    if !(nn > 0.0) {
        return Err(Error::InvalidInput("contrast vector must be nonzero".into()));
    }
    let stat = eta.dot(y);
    let c = eta / nn;
    let z = y - &c * stat;
    let rho = &event.a_matrix * &c;
    let az = &event.a_matrix * &z;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let c_norm = c.norm();
    for i in 0..event.n_constraints() {
        let row_norm = event.a_matrix.row(i).norm();
        if rho[i].abs() <= 1e-12 * row_norm * c_norm {
            continue;
        }
        let v = (event.b_vector[i] - az[i]) / rho[i];
        let ay = az[i] + rho[i] * stat;
        // Slack of the observed response on this row, in units of the statistic.
        let excess = rho[i] * (stat - v);
        if excess > event.row_tolerance(i, ay) {
            return Err(Error::EventInconsistency(format!(
                "observed statistic {stat} outside constraint {i} bound {v} (model {:?})",
                event.model
            )));
        }
        if rho[i] > 0.0 {
            hi = hi.min(v);
        } else {
            lo = lo.max(v);
        }
    }
    Ok((lo.min(stat), hi.max(stat)))
}
