//! Overlapped patch Hankelization of a matrix into a 6th-order tensor and
//! its inverse.
//!
//! The forward path is:
//!
//! 1. pad the `I1 x I2` image at the bottom/right by edge replication until
//!    `I' - P` is a multiple of the patch stride `P - O`;
//! 2. [`HankelPlan::rearrange_overlapped`]: lay the overlapping `P x P`
//!    patches side by side into a `J1 x J2` matrix, so the last `O`
//!    rows/columns of each patch are duplicated as the first `O` of the next;
//! 3. [`HankelPlan::patch_hankelize`]: slide a window of `T` consecutive
//!    patches along each axis, giving a tensor of shape
//!    `P x P x T1 x K1 x T2 x K2` with `K = J/P - T + 1` window positions.
//!
//! Entry `(p1, p2, t1, k1, t2, k2)` of the embedded tensor is
//! `XJ[(k1 + t1) * P + p1, (k2 + t2) * P + p2]`. Unfolding modes
//! `(p1, t1, k1)` against `(p2, t2, k2)` gives the `D1 x D2` block-Hankel
//! matrix `S1 * XJ * S2^T` with `D = P * T * K`.
//!
//! The inverse averages every duplicated copy back into `XJ`
//! ([`HankelPlan::dehankelize`]) and cross-fades the overlap strips back to
//! `I1 x I2` ([`HankelPlan::blend_overlaps`]).

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use crate::Matrix;

/// Geometry of one overlapped patch embedding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HankelPlan {
    pub rows: usize,
    pub cols: usize,
    pub patch: usize,
    pub overlap: usize,
    pub window: [usize; 2],
    /// Rows/columns appended by edge replication.
    pub pad_rows: usize,
    pub pad_cols: usize,
    /// Extents of the rearranged (patch-duplicated) matrix.
    pub j1: usize,
    pub j2: usize,
    /// Number of window positions per axis.
    pub k1: usize,
    pub k2: usize,
    /// Extents of the block-Hankel matrix, `P * T * K`.
    pub d1: usize,
    pub d2: usize,
}

/// Smallest `pad >= 0` such that `len + pad - patch` is a multiple of `stride`.
fn minimal_pad(len: usize, patch: usize, stride: usize) -> usize {
    (stride - (len - patch) % stride) % stride
}

/// Cross-fade weights for an overlap of width `overlap`: a linear ramp from
/// 1 down to 0 (`(O - u) / (O - 1)` for `u = 1..O`), or `[0.5]` when `O = 1`.
/// The earlier copy gets `w`, the later copy `1 - w`.
pub fn blend_weights(overlap: usize) -> Vec<f64> {
    match overlap {
        0 => Vec::new(),
        1 => vec![0.5],
        o => (1..=o)
            .map(|u| (o - u) as f64 / (o - 1) as f64)
            .collect(),
    }
}

/// Number of `(t, k)` pairs with `t + k = block`, `t < window`, `k < positions`.
fn copies(block: usize, window: usize, positions: usize) -> usize {
    let lo = block.saturating_sub(positions - 1);
    let hi = block.min(window - 1);
    hi + 1 - lo
}

impl HankelPlan {
    pub fn new(rows: usize, cols: usize, patch: usize, overlap: usize, window: [usize; 2]) -> Result<Self> {
        if patch == 0 {
            return Err(Error::InfeasiblePlan("patch size must be positive".into()));
        }
        if overlap >= patch {
            return Err(Error::InfeasiblePlan(format!(
                "overlap {overlap} must be smaller than the patch size {patch}"
            )));
        }
        if patch > rows.min(cols) {
            return Err(Error::InfeasiblePlan(format!(
                "patch size {patch} exceeds the image extent {rows}x{cols}"
            )));
        }
        if window.contains(&0) {
            return Err(Error::InfeasiblePlan("window sizes must be positive".into()));
        }
        let stride = patch - overlap;
        let pad_rows = minimal_pad(rows, patch, stride);
        let pad_cols = minimal_pad(cols, patch, stride);
        let blocks1 = (rows + pad_rows - patch) / stride + 1;
        let blocks2 = (cols + pad_cols - patch) / stride + 1;
        if window[0] > blocks1 || window[1] > blocks2 {
            return Err(Error::InfeasiblePlan(format!(
                "window {window:?} is larger than the {blocks1}x{blocks2} patch grid"
            )));
        }
        let k1 = blocks1 - window[0] + 1;
        let k2 = blocks2 - window[1] + 1;
        Ok(Self {
            rows,
            cols,
            patch,
            overlap,
            window,
            pad_rows,
            pad_cols,
            j1: patch * blocks1,
            j2: patch * blocks2,
            k1,
            k2,
            d1: patch * window[0] * k1,
            d2: patch * window[1] * k2,
        })
    }

    pub fn stride(&self) -> usize {
        self.patch - self.overlap
    }

    pub fn blocks(&self) -> [usize; 2] {
        [self.j1 / self.patch, self.j2 / self.patch]
    }

    /// Shape of the embedded tensor, `P x P x T1 x K1 x T2 x K2`.
    pub fn embedded_shape(&self) -> [usize; 6] {
        [
            self.patch,
            self.patch,
            self.window[0],
            self.k1,
            self.window[1],
            self.k2,
        ]
    }

    fn check_matrix(&self, m: &Matrix, rows: usize, cols: usize) -> Result<()> {
        if m.shape() != (rows, cols) {
            return Err(Error::ShapeMismatch {
                expected: vec![rows, cols],
                actual: vec![m.nrows(), m.ncols()],
            });
        }
        Ok(())
    }

    /// Row (or column) of the padded input that feeds position `j` of the
    /// rearranged matrix, clamped to the last real row for padding.
    fn source_index(&self, j: usize, len: usize) -> usize {
        let (block, offset) = (j / self.patch, j % self.patch);
        (block * self.stride() + offset).min(len - 1)
    }

    /// Builds the `J1 x J2` matrix of side-by-side overlapping patches.
    pub fn rearrange_overlapped(&self, x: &Matrix) -> Result<Matrix> {
        self.check_matrix(x, self.rows, self.cols)?;
        let rows: Vec<usize> = (0..self.j1).map(|j| self.source_index(j, self.rows)).collect();
        let cols: Vec<usize> = (0..self.j2).map(|j| self.source_index(j, self.cols)).collect();
        Ok(Matrix::from_fn(self.j1, self.j2, |r, c| x[(rows[r], cols[c])]))
    }

    /// Block-Hankel embedding of the rearranged matrix.
    pub fn patch_hankelize(&self, xj: &Matrix) -> Result<DenseTensor> {
        self.check_matrix(xj, self.j1, self.j2)?;
        let [p, _, t1, k1, t2, k2] = self.embedded_shape();
        let mut data = Vec::with_capacity(p * p * t1 * k1 * t2 * k2);
        for kk2 in 0..k2 {
            for tt2 in 0..t2 {
                for kk1 in 0..k1 {
                    for tt1 in 0..t1 {
                        let row0 = (kk1 + tt1) * p;
                        for p2 in 0..p {
                            let col = (kk2 + tt2) * p + p2;
                            let column = xj.column(col);
                            data.extend_from_slice(&column.as_slice()[row0..row0 + p]);
                        }
                    }
                }
            }
        }
        DenseTensor::new(self.embedded_shape().to_vec(), data)
    }

    /// Averages every duplicated copy back into a `J1 x J2` matrix.
    pub fn dehankelize(&self, t: &DenseTensor) -> Result<Matrix> {
        if t.shape() != self.embedded_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.embedded_shape().to_vec(),
                actual: t.shape().to_vec(),
            });
        }
        let [p, _, t1, k1, t2, k2] = self.embedded_shape();
        let mut sum = Matrix::zeros(self.j1, self.j2);
        let data = t.data();
        let mut pos = 0;
        for kk2 in 0..k2 {
            for tt2 in 0..t2 {
                for kk1 in 0..k1 {
                    for tt1 in 0..t1 {
                        let row0 = (kk1 + tt1) * p;
                        for p2 in 0..p {
                            let col = (kk2 + tt2) * p + p2;
                            let mut column = sum.column_mut(col);
                            let dst = &mut column.as_mut_slice()[row0..row0 + p];
                            for (d, s) in dst.iter_mut().zip(&data[pos..pos + p]) {
                                *d += s;
                            }
                            pos += p;
                        }
                    }
                }
            }
        }
        let row_copies: Vec<f64> = (0..self.j1)
            .map(|r| copies(r / p, t1, k1) as f64)
            .collect();
        for c in 0..self.j2 {
            let cc = copies(c / p, t2, k2) as f64;
            for (r, v) in sum.column_mut(c).iter_mut().enumerate() {
                *v /= row_copies[r] * cc;
            }
        }
        Ok(sum)
    }

    /// Folds the `J1 x J2` matrix back to `I1 x I2`, cross-fading each
    /// overlap strip between the earlier and later copy and dropping padding.
    ///
    /// Strips are merged patch by patch, the earlier copy being whatever has
    /// already been written at that position. When `O <= P - O` that is
    /// exactly the previous patch's trailing strip.
    pub fn blend_overlaps(&self, xj: &Matrix) -> Result<Matrix> {
        self.check_matrix(xj, self.j1, self.j2)?;
        let w = blend_weights(self.overlap);
        let cols_merged = merge_axis(&xj.transpose(), self.patch, self.stride(), &w, self.cols + self.pad_cols);
        let merged = merge_axis(&cols_merged.transpose(), self.patch, self.stride(), &w, self.rows + self.pad_rows);
        Ok(merged.view((0, 0), (self.rows, self.cols)).into_owned())
    }

    /// Full forward embedding of an `I1 x I2` image.
    pub fn embed(&self, x: &Matrix) -> Result<DenseTensor> {
        self.patch_hankelize(&self.rearrange_overlapped(x)?)
    }

    /// Full inverse embedding back to `I1 x I2`.
    pub fn reconstruct(&self, t: &DenseTensor) -> Result<Matrix> {
        self.blend_overlaps(&self.dehankelize(t)?)
    }
}

/// Merges the patch blocks along the row axis of `m` (`J x width`) into `len` rows.
fn merge_axis(m: &Matrix, patch: usize, stride: usize, w: &[f64], len: usize) -> Matrix {
    let overlap = w.len();
    let blocks = m.nrows() / patch;
    let mut out = Matrix::zeros(len, m.ncols());
    for b in 0..blocks {
        let start = b * stride;
        for u in 0..patch {
            let src = m.row(b * patch + u);
            if b > 0 && u < overlap {
                let earlier = out.row(start + u).clone_owned();
                out.row_mut(start + u)
                    .copy_from(&(earlier * w[u] + src * (1.0 - w[u])));
            } else {
                out.row_mut(start + u).copy_from(&src);
            }
        }
    }
    out
}
