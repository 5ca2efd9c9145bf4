use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::RngCore;

use super::ols::{ols_fit, wald_ci, OlsFit};
use super::SelectiveInterval;
use crate::error::{Error, Result};
use crate::linalg;
use crate::selection::{SelectionResult, Selector};

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub selection_rows: Vec<usize>,
    pub inference_rows: Vec<usize>,
    pub selection: SelectionResult,
    /// OLS on the inference half restricted to the selected model.
    pub refit: OlsFit,
    pub intervals: Vec<SelectiveInterval>,
}

impl SplitResult {
    pub fn model(&self) -> &[usize] {
        &self.selection.active_set
    }
}

/// Random 50/50 partition of `0..n`; with odd `n` the inference half gets the extra row.
pub fn split_rows(n: usize, rng: &mut dyn RngCore) -> (Vec<usize>, Vec<usize>) {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let half = n / 2;
    let mut a = perm[..half].to_vec();
    let mut b = perm[half..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

/// Selects on one random half and forms Wald intervals on the other.
pub fn split_inference(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    selector: &dyn Selector,
    alpha: f64,
    rng: &mut dyn RngCore,
) -> Result<SplitResult> {
    let (n, p) = x.shape();
    if n < 4 + 2 * p {
        return Err(Error::Config(format!("sample splitting needs n ≥ {}, got {n}", 4 + 2 * p)));
    }
    let (a, b) = split_rows(n, rng);
    let xa = linalg::select_rows(x, &a);
    let ya = linalg::select_entries(y, &a);
    let selection = selector.select(&xa, &ya, rng)?;
    let xb = linalg::select_rows(x, &b);
    let yb = linalg::select_entries(y, &b);
    if selection.active_set.len() + 1 >= b.len() {
        return Err(Error::InvalidInput(format!(
            "selected model of size {} too large for {} inference rows",
            selection.active_set.len(),
            b.len()
        )));
    }
    let refit = ols_fit(&xb, &yb, &selection.active_set)?;
    let intervals = wald_ci(&refit, alpha);
    Ok(SplitResult { selection_rows: a, inference_rows: b, selection, refit, intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::FixedSelector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn halves_partition_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = split_rows(41, &mut rng);
        assert_eq!((a.len(), b.len()), (20, 21));
        let mut all = [a, b].concat();
        all.sort_unstable();
        assert_eq!(all, (0..41).collect::<Vec<_>>());
    }

    #[test]
    fn empty_selection_gives_no_intervals() {
        let x = DMatrix::from_fn(40, 4, |i, j| ((i * (j + 2)) as f64).sin());
        let y = DVector::from_fn(40, |i, _| (i as f64).cos());
        let sel = FixedSelector { name: "none".into(), model: vec![] };
        let r = split_inference(&x, &y, &sel, 0.1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(r.intervals.is_empty());
        assert_eq!((r.selection_rows.len(), r.inference_rows.len()), (20, 20));
    }
}
