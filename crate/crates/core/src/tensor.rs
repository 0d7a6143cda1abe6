//! Dense N-dimensional tensors and the multilinear primitives built on them.
//!
//! Storage order is *first mode fastest*: the element at multi-index
//! `(i_0, i_1, ..., i_{N-1})` lives at `i_0 + I_0 * (i_1 + I_1 * (i_2 + ...))`.
//! The same rule decodes every grouped index in this crate, so the
//! canonical unfolding `X_[n]` is a zero-copy reinterpretation of the data
//! and the mode-n unfolding only needs a cyclic permutation.
//!
//! Modes are numbered from zero.

use crate::error::{Error, Result};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn validate_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "a tensor needs at least one mode".into(),
        });
    }
    if shape.contains(&0) {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "every extent must be positive".into(),
        });
    }
    Ok(shape.iter().product())
}

/// Strides for the first-mode-fastest layout.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(shape.len());
    let mut acc = 1;
    for &d in shape {
        s.push(acc);
        acc *= d;
    }
    s
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel = validate_shape(&shape)?;
        if data.len() != numel {
            return Err(Error::InvalidShape {
                shape,
                reason: format!("data has {} values, shape needs {numel}", data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Result<Self> {
        let numel = validate_shape(&shape)?;
        Ok(Self {
            shape,
            data: vec![value; numel],
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        Self::filled(shape, 0.0)
    }

    pub fn ones(shape: Vec<usize>) -> Result<Self> {
        Self::filled(shape, 1.0)
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let numel = validate_shape(&shape)?;
        let mut data = Vec::with_capacity(numel);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..numel {
            data.push(f(&idx));
            increment(&mut idx, &shape);
        }
        Ok(Self { shape, data })
    }

    /// Wraps a matrix as a second-order tensor.
    pub fn from_matrix(m: &Matrix) -> Self {
        Self {
            shape: vec![m.nrows(), m.ncols()],
            data: m.as_slice().to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.shape.len() || index.iter().zip(&self.shape).any(|(i, d)| i >= d) {
            return Err(Error::IndexOutOfRange {
                index: index.to_vec(),
                shape: self.shape.clone(),
            });
        }
        let mut lin = 0;
        for (&i, &d) in index.iter().zip(&self.shape).rev() {
            lin = lin * d + i;
        }
        Ok(lin)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[self.linear_index(index)?])
    }

    /// Reorders modes: mode `k` of the result is mode `order[k]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let n = self.order();
        let mut seen = vec![false; n];
        if order.len() != n {
            return Err(Error::InvalidShape {
                shape: self.shape.clone(),
                reason: format!("permutation {order:?} has the wrong length"),
            });
        }
        for &o in order {
            if o >= n || seen[o] {
                return Err(Error::InvalidShape {
                    shape: self.shape.clone(),
                    reason: format!("{order:?} is not a permutation"),
                });
            }
            seen[o] = true;
        }
        let in_strides = strides(&self.shape);
        let out_shape: Vec<usize> = order.iter().map(|&o| self.shape[o]).collect();
        let src_strides: Vec<usize> = order.iter().map(|&o| in_strides[o]).collect();
        let mut data = Vec::with_capacity(self.numel());
        let mut idx = vec![0usize; n];
        let mut offset = 0usize;
        let inner = out_shape[0];
        let inner_stride = src_strides[0];
        let outer = self.numel() / inner;
        for _ in 0..outer {
            for i in 0..inner {
                data.push(self.data[offset + i * inner_stride]);
            }
            // advance modes 1.. with carry, tracking the source offset
            for k in 1..n {
                idx[k] += 1;
                offset += src_strides[k];
                if idx[k] < out_shape[k] {
                    break;
                }
                offset -= src_strides[k] * out_shape[k];
                idx[k] = 0;
            }
        }
        Ok(Self {
            shape: out_shape,
            data,
        })
    }

    /// Mode-n unfolding `X_(n)`: an `I_n x prod(others)` matrix whose column
    /// index decodes modes `n+1, ..., N-1, 0, ..., n-1` with the first of those
    /// running fastest.
    pub fn unfold_mode(&self, mode: usize) -> Result<Matrix> {
        let n = self.order();
        if mode >= n {
            return Err(Error::ModeOutOfRange { mode, order: n });
        }
        let order: Vec<usize> = (0..n).map(|k| (mode + k) % n).collect();
        let p = self.permute(&order)?;
        let rows = self.shape[mode];
        Ok(Matrix::from_vec(rows, self.numel() / rows, p.data))
    }

    /// Inverse of [`unfold_mode`](Self::unfold_mode).
    pub fn fold_mode(m: &Matrix, mode: usize, shape: &[usize]) -> Result<Self> {
        let n = shape.len();
        let numel = validate_shape(shape)?;
        if mode >= n {
            return Err(Error::ModeOutOfRange { mode, order: n });
        }
        if m.nrows() != shape[mode] || m.nrows() * m.ncols() != numel {
            return Err(Error::ShapeMismatch {
                expected: vec![shape[mode], numel / shape[mode]],
                actual: vec![m.nrows(), m.ncols()],
            });
        }
        let order: Vec<usize> = (0..n).map(|k| (mode + k) % n).collect();
        let permuted_shape: Vec<usize> = order.iter().map(|&o| shape[o]).collect();
        let t = Self::new(permuted_shape, m.as_slice().to_vec())?;
        // inverse cyclic shift
        let inverse: Vec<usize> = (0..n).map(|k| (k + n - mode) % n).collect();
        t.permute(&inverse)
    }

    /// Canonical unfolding `X_[split]`: rows encode modes `0..split`, columns
    /// modes `split..N`, both first-fastest. Requires `1 <= split < N`.
    pub fn unfold_canonical(&self, split: usize) -> Result<Matrix> {
        let n = self.order();
        if split == 0 || split >= n {
            return Err(Error::ModeOutOfRange {
                mode: split,
                order: n,
            });
        }
        let rows: usize = self.shape[..split].iter().product();
        Ok(Matrix::from_column_slice(
            rows,
            self.numel() / rows,
            &self.data,
        ))
    }

    /// Inverse of [`unfold_canonical`](Self::unfold_canonical).
    pub fn fold_canonical(m: &Matrix, split: usize, shape: &[usize]) -> Result<Self> {
        let n = shape.len();
        if split == 0 || split >= n {
            return Err(Error::ModeOutOfRange {
                mode: split,
                order: n,
            });
        }
        let numel = validate_shape(shape)?;
        let rows: usize = shape[..split].iter().product();
        if m.nrows() != rows || m.nrows() * m.ncols() != numel {
            return Err(Error::ShapeMismatch {
                expected: vec![rows, numel / rows],
                actual: vec![m.nrows(), m.ncols()],
            });
        }
        Self::new(shape.to_vec(), m.as_slice().to_vec())
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                actual: other.shape.clone(),
            });
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// `||self - other||_F`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.zip_with(other, |a, b| a - b)?.frobenius_norm())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Advances a first-fastest multi-index counter; wraps to zero after the last index.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for (i, &d) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < d {
            return;
        }
        *i = 0;
    }
}
