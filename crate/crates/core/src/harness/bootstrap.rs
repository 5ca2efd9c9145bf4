//! Bootstrap inclusion frequencies of a selection procedure.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::linalg;
use crate::selection::Selector;

pub const DEFAULT_BOOTSTRAP: usize = 100;

/// Per-variable share of `n_boot` row resamples (with replacement) in which the
/// selector, tuning included, picks the variable. A resample whose selection
/// fails counts as the empty model; the number of such failures is returned too.
pub fn bootstrap_selection_frequencies(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    selector: &dyn Selector,
    n_boot: usize,
    rng: &mut dyn RngCore,
) -> Result<(Vec<f64>, usize)> {
    if n_boot == 0 {
        return Err(Error::InvalidInput("n_boot must be at least 1".into()));
    }
    let (n, p) = x.shape();
    let mut counts = vec![0usize; p];
    let mut failures = 0;
    for _ in 0..n_boot {
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let xb = linalg::select_rows(x, &rows);
        let yb = linalg::select_entries(y, &rows);
        // Resampled columns can be constant; selection then errors and is counted empty.
        let selected = linalg::standardize(&xb).and_then(|s| selector.select(&s.x, &yb, rng));
        match selected {
            Ok(sel) => {
                for j in sel.active_set {
                    counts[j] += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    Ok((counts.iter().map(|&c| c as f64 / n_boot as f64).collect(), failures))
}
