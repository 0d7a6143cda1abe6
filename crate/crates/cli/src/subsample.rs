//! Simulated A-scan dropout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trsr_core::{Mask, Matrix};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Subsampled {
    /// Kept columns, in their original order.
    pub kept: Matrix,
    /// Full-width mask, true on kept columns.
    pub mask: Mask,
    /// `Some(L)` when the columns were kept at a regular stride `L`.
    pub stride: Option<usize>,
}

/// Stride `L` when `ratio` is within 0.01 of `1 - 1/L`.
fn stride_for(ratio: f64, width: usize) -> Option<usize> {
    (1..=width.max(1)).find(|&l| (ratio - (1.0 - 1.0 / l as f64)).abs() < 0.01)
}

/// Drops a fraction `missing_ratio` of the columns of `x`.
///
/// Ratios of the form `1 - 1/L` keep every `L`-th column starting with the
/// first. Any other ratio drops a random subset of
/// `round(width * missing_ratio)` columns drawn from `seed`.
pub fn subsample_columns(x: &Matrix, missing_ratio: f64, seed: u64) -> Result<Subsampled> {
    if !(0.0..1.0).contains(&missing_ratio) {
        return Err(CliError::Config(format!("missing ratio must lie in [0, 1), got {missing_ratio}")));
    }
    let width = x.ncols();
    let stride = stride_for(missing_ratio, width);
    let keep: Vec<usize> = match stride {
        Some(l) => (0..width).step_by(l).collect(),
        None => {
            let drop = (width as f64 * missing_ratio).round() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, width, width - drop.min(width)).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    if keep.len() < 2 {
        return Err(CliError::Config(format!(
            "missing ratio {missing_ratio} leaves {} of {width} columns; at least 2 are needed",
            keep.len()
        )));
    }
    let mut observed = vec![false; width];
    for &k in &keep {
        observed[k] = true;
    }
    Ok(Subsampled {
        kept: x.select_columns(&keep),
        mask: Mask::from_columns(x.nrows(), observed)?,
        stride,
    })
}
