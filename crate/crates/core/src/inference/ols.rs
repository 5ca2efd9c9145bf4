use nalgebra::{DMatrix, DVector};

use super::{InferenceKind, SelectiveInterval};
use crate::error::{Error, Result};
use crate::linalg;
use crate::normal;

/// Least-squares refit on a submodel (intercept included via centering).
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub model: Vec<usize>,
    pub coefficients: DVector<f64>,
    pub std_errors: DVector<f64>,
    pub residual_sd: f64,
    /// Degrees of freedom of `residual_sd`; `None` means treated as known.
    pub df: Option<f64>,
    pub intercept: f64,
    /// `(X_Mᵀ X_M)⁻¹` on the centered columns.
    pub gram_inverse: DMatrix<f64>,
}

pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, model: &[usize]) -> Result<OlsFit> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::InvalidInput(format!("design has {n} rows but response has {}", y.len())));
    }
    if model.len() + 1 >= n {
        return Err(Error::InvalidInput(format!(
            "model of size {} needs more than {} observations",
            model.len(),
            model.len() + 1
        )));
    }
    let (yc, y_mean) = linalg::centered(y);
    let mut xm = linalg::select_columns(x, model);
    let means = linalg::center_columns(&mut xm);
    let df = (n - model.len() - 1) as f64;
    if model.is_empty() {
        return Ok(OlsFit {
            model: Vec::new(),
            coefficients: DVector::zeros(0),
            std_errors: DVector::zeros(0),
            residual_sd: (yc.norm_squared() / df).sqrt(),
            df: Some(df),
            intercept: y_mean,
            gram_inverse: DMatrix::zeros(0, 0),
        });
    }
    let chol = linalg::gram_cholesky(&xm).map_err(|e| match e {
        Error::RankDeficient { columns } => Error::RankDeficient {
            columns: columns.into_iter().map(|k| model[k]).collect(),
        },
        other => other,
    })?;
    let coefficients = chol.solve(&(xm.transpose() * &yc));
    let resid = &yc - &xm * &coefficients;
    let residual_sd = (resid.norm_squared() / df).sqrt();
    let gram_inverse = chol.inverse();
    let intercept = y_mean - means.dot(&coefficients);
    let mut fit = OlsFit {
        model: model.to_vec(),
        coefficients,
        std_errors: DVector::zeros(model.len()),
        residual_sd,
        df: Some(df),
        intercept,
        gram_inverse,
    };
    fit.set_residual_sd(residual_sd, Some(df));
    Ok(fit)
}

impl OlsFit {
    /// Replaces the error-scale estimate (e.g. by the full-model one) and rescales the SEs.
    pub fn set_residual_sd(&mut self, sd: f64, df: Option<f64>) {
        self.residual_sd = sd;
        self.df = df;
        self.std_errors = DVector::from_iterator(
            self.model.len(),
            (0..self.model.len()).map(|k| sd * self.gram_inverse[(k, k)].sqrt()),
        );
    }

    pub fn with_residual_sd(mut self, sd: f64, df: Option<f64>) -> Self {
        self.set_residual_sd(sd, df);
        self
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::repeat(x.nrows(), self.intercept);
        for (k, &j) in self.model.iter().enumerate() {
            out.axpy(self.coefficients[k], &x.column(j), 1.0);
        }
        out
    }

    /// Coefficient of variable `j`, if it is in the model.
    pub fn coefficient_of(&self, j: usize) -> Option<f64> {
        self.model.iter().position(|&m| m == j).map(|k| self.coefficients[k])
    }
}

/// `β̂_j ± t_{df,1−α/2} SE_j` with two-sided t-test p-values.
pub fn wald_ci(fit: &OlsFit, alpha: f64) -> Vec<SelectiveInterval> {
    let q = normal::t_quantile(1.0 - alpha / 2.0, fit.df);
    fit.model
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let est = fit.coefficients[k];
            let se = fit.std_errors[k];
            let p = normal::t_two_sided_p(est / se, fit.df);
            SelectiveInterval::new(j, est, est - q * se, est + q * se, p, InferenceKind::Wald)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_model_is_intercept_only() {
        let x = DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 2.0, 6.0]);
        let fit = ols_fit(&x, &y, &[]).unwrap();
        assert_eq!(fit.intercept, 3.0);
        assert!(wald_ci(&fit, 0.1).is_empty());
    }

    #[test]
    fn orthonormal_model_estimates_are_inner_products() {
        let x = DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
        ) / 2.0;
        let y = DVector::from_vec(vec![3.0, -1.0, 0.5, 2.0]);
        let yc = linalg::centered(&y).0;
        let fit = ols_fit(&x, &y, &[0, 1]).unwrap();
        for k in 0..2 {
            assert!((fit.coefficients[k] - x.column(k).dot(&yc)).abs() < 1e-12);
            assert!((fit.std_errors[k] - fit.residual_sd).abs() < 1e-12);
        }
        assert_eq!(fit.df, Some(1.0));
    }

    #[test]
    fn wald_half_width_and_symmetry() {
        let mut fit = OlsFit {
            model: vec![2],
            coefficients: DVector::from_vec(vec![0.0]),
            std_errors: DVector::from_vec(vec![0.5]),
            residual_sd: 0.5,
            df: None,
            intercept: 0.0,
            gram_inverse: DMatrix::from_element(1, 1, 1.0),
        };
        fit.set_residual_sd(0.5, None);
        let ci = &wald_ci(&fit, 0.1)[0];
        assert!((ci.upper - 0.822_426_813_475_736).abs() < 1e-8);
        assert_eq!(ci.lower, -ci.upper);
        assert_eq!(ci.p_value, 1.0);
        assert_eq!(ci.variable, 2);
    }

    #[test]
    fn rank_deficiency_names_original_columns() {
        let x = DMatrix::from_row_slice(
            5,
            3,
            &[1.0, 0.0, 2.0, 2.0, 1.0, 4.0, 3.0, 0.0, 6.0, 4.0, 1.0, 8.0, 5.0, 0.0, 10.0],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 6.0]);
        match ols_fit(&x, &y, &[0, 2]) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![2]),
            other => panic!("{other:?}"),
        }
    }
}
