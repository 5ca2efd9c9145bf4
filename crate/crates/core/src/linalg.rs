//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative tolerance used to declare a column collinear with the columns before it.
pub const COLLINEAR_TOL: f64 = 1e-10;

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Subtracts the column means in place and returns them.
pub fn center_columns(x: &mut DMatrix<f64>) -> DVector<f64> {
    let means = column_means(x);
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    means
}

pub fn centered(y: &DVector<f64>) -> (DVector<f64>, f64) {
    let mean = y.mean();
    (y.add_scalar(-mean), mean)
}

/// Population (n-denominator) variance.
pub fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Column-standardized copy of a design: mean zero, unit n-denominator SD.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub x: DMatrix<f64>,
    pub means: DVector<f64>,
    pub sds: DVector<f64>,
}

pub fn standardize(x: &DMatrix<f64>) -> Result<Standardized> {
    let mut xs = x.clone();
    let means = center_columns(&mut xs);
    let n = x.nrows() as f64;
    let mut sds = DVector::zeros(x.ncols());
    let mut constant = Vec::new();
    for (j, mut col) in xs.column_iter_mut().enumerate() {
        let sd = (col.norm_squared() / n).sqrt();
        let scale = means[j].abs().max(1.0);
        if !(sd > 1e-12 * scale) {
            constant.push(j);
            continue;
        }
        col /= sd;
        sds[j] = sd;
    }
    if !constant.is_empty() {
        return Err(Error::InvalidInput(format!(
            "constant columns cannot be standardized: {constant:?}"
        )));
    }
    Ok(Standardized { x: xs, means, sds })
}

pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    x.select_columns(cols)
}

pub fn select_rows(x: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    x.select_rows(rows)
}

pub fn select_entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Indices of columns that are (numerically) in the span of the preceding columns,
/// via modified Gram–Schmidt.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for (j, col) in x.column_iter().enumerate() {
        let mut r = col.clone_owned();
        let norm0 = r.norm();
        for q in &basis {
            let d = q.dot(&r);
            r.axpy(-d, q, 1.0);
        }
        let norm = r.norm();
        if norm0 == 0.0 || norm <= COLLINEAR_TOL.sqrt() * norm0 {
            bad.push(j);
        } else {
            basis.push(r / norm);
        }
    }
    bad
}

/// Cholesky factor of `X^T X`, failing with the collinear columns named.
pub fn gram_cholesky(x: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let bad = collinear_columns(x);
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    Cholesky::new(x.transpose() * x).ok_or_else(|| Error::RankDeficient {
        columns: collinear_columns(x),
    })
}

/// Orthonormal basis of the column space of a full-column-rank matrix.
pub fn orthonormal_basis(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let bad = collinear_columns(x);
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    Ok(x.clone().qr().q())
}

/// Sample quantile with linear interpolation between order statistics (R type 7).
/// `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_gives_unit_columns() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 10.0, 2.0, 30.0, 3.0, 20.0, 6.0, 0.0]);
        let s = standardize(&x).unwrap();
        for col in s.x.column_iter() {
            assert!(col.sum().abs() < 1e-12);
            assert!((col.norm_squared() / 4.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_is_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        assert!(matches!(standardize(&x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn collinear_columns_are_named() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 2.0, 0.0, 1.0, 0.0, 1.0, 1.0, 2.0, 2.0, 0.0, 4.0],
        );
        assert_eq!(collinear_columns(&x), vec![2]);
        assert!(matches!(gram_cholesky(&x), Err(Error::RankDeficient { columns }) if columns == vec![2]));
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
