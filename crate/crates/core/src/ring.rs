//! Tensor Ring (TR) format: evaluation, materialization, alternating least
//! squares fitting and rank growth.
//!
//! Core `n` has shape `R_n x I_n x R_{n+1}` with the bond vector closing on
//! itself (`R_N = R_0`). Tensor Train is the special case `R_0 = 1`.
//!
//! Lateral slice products are computed in bulk as *stacked chains*: the
//! product of the slices of cores `a, a+1, ..., b` for every combination of
//! their indices, stored as one `(R_a * count) x R_{b+1}` matrix where slice
//! `j` (first core's index fastest) occupies rows `j * R_a .. (j + 1) * R_a`.
//! With first-mode-fastest core storage, appending a core is a single matrix
//! product followed by a free reshape.

use nalgebra::{DMatrixView, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use crate::Matrix;

/// Squared relative residual treated as an exact fit.
const EXACT_FIT: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRing {
    cores: Vec<DenseTensor>,
}

/// ALS stopping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsOptions {
    /// Maximum number of full sweeps over the cores.
    pub sweeps: usize,
    /// Stop once the relative objective decrease between sweeps drops below this.
    pub tol: f64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self {
            sweeps: 10,
            tol: 1e-4,
        }
    }
}

/// Objective trace of an ALS fit. Objectives are squared Frobenius residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub initial_objective: f64,
    /// Objective after each completed sweep.
    pub objectives: Vec<f64>,
    /// Objective after every individual core update, in update order.
    pub core_objectives: Vec<f64>,
}

impl FitReport {
    pub fn final_objective(&self) -> f64 {
        self.objectives
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }
}

/// Growth rule applied between rank levels.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSchedule {
    /// Starting bond vector `R_0..R_{N-1}`.
    pub initial: Vec<usize>,
    pub max_rank: usize,
    pub step: usize,
}

impl RankSchedule {
    pub fn uniform(order: usize, initial: usize, max_rank: usize) -> Result<Self> {
        Self::new(vec![initial; order], max_rank, 1)
    }

    pub fn new(initial: Vec<usize>, max_rank: usize, step: usize) -> Result<Self> {
        if initial.is_empty() || initial.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "initial ranks must be positive, got {initial:?}"
            )));
        }
        if initial.iter().any(|&r| r > max_rank) {
            return Err(Error::InvalidConfig(format!(
                "initial ranks {initial:?} exceed the maximum rank {max_rank}"
            )));
        }
        Ok(Self {
            initial,
            max_rank,
            step,
        })
    }
}

struct Chain {
    left: usize,
    count: usize,
    mat: Matrix,
}

fn core_dims(core: &DenseTensor) -> (usize, usize, usize) {
    let s = core.shape();
    (s[0], s[1], s[2])
}

/// Stacked slice products of `cores` taken in the given order.
fn chain<'a>(mut cores: impl Iterator<Item = &'a DenseTensor>) -> Chain {
    let first = cores.next().expect("chain needs at least one core");
    let (left, size, right) = core_dims(first);
    let mut acc = Chain {
        left,
        count: size,
        mat: Matrix::from_column_slice(left * size, right, first.data()),
    };
    for core in cores {
        let (r0, size, r1) = core_dims(core);
        debug_assert_eq!(acc.mat.ncols(), r0);
        let rhs = DMatrixView::from_slice(core.data(), r0, size * r1);
        let prod = &acc.mat * rhs;
        let rows = acc.mat.nrows() * size;
        acc.mat = prod.reshape_generic(Dyn(rows), Dyn(r1));
        acc.count *= size;
    }
    acc
}

impl TensorRing {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidRing("a ring needs at least one core".into()));
        }
        for (n, core) in cores.iter().enumerate() {
            if core.order() != 3 {
                return Err(Error::InvalidRing(format!(
                    "core {n} has order {}, expected 3",
                    core.order()
                )));
            }
        }
        let n = cores.len();
        for k in 0..n {
            let trailing = cores[k].shape()[2];
            let leading = cores[(k + 1) % n].shape()[0];
            if trailing != leading {
                return Err(Error::InvalidRing(format!(
                    "core {k} trailing rank {trailing} does not match core {} leading rank {leading}",
                    (k + 1) % n
                )));
            }
        }
        Ok(Self { cores })
    }

    /// Random ring with i.i.d. standard normal core entries. `bonds` holds
    /// `R_0..R_{N-1}`; core `n` has shape `bonds[n] x shape[n] x bonds[n+1 mod N]`.
    pub fn random<R: Rng + ?Sized>(shape: &[usize], bonds: &[usize], rng: &mut R) -> Result<Self> {
        Self::random_scaled(shape, bonds, 1.0, rng)
    }

    pub fn random_scaled<R: Rng + ?Sized>(
        shape: &[usize],
        bonds: &[usize],
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if shape.len() != bonds.len() {
            return Err(Error::InvalidRing(format!(
                "{} mode sizes but {} bonds",
                shape.len(),
                bonds.len()
            )));
        }
        let n = shape.len();
        let cores = (0..n)
            .map(|k| {
                DenseTensor::from_fn(vec![bonds[k], shape[k], bonds[(k + 1) % n]], |_| {
                    scale * rng.sample::<f64, _>(StandardNormal)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Bond dimensions `R_0..R_{N-1}`.
    pub fn bonds(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[0]).collect()
    }

    /// Full rank vector `[R_0, ..., R_N]` with `R_N = R_0`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = self.bonds();
        r.push(r[0]);
        r
    }

    pub fn max_rank(&self) -> usize {
        self.bonds().into_iter().max().unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.cores.iter().map(|c| c.numel()).sum()
    }

    fn slice(&self, n: usize, i: usize) -> Matrix {
        let (r0, size, r1) = core_dims(&self.cores[n]);
        let data = self.cores[n].data();
        Matrix::from_fn(r0, r1, |a, b| data[a + r0 * (i + size * b)])
    }

    /// Single entry: trace of the ordered product of the indexed lateral slices.
    pub fn element(&self, index: &[usize]) -> Result<f64> {
        let sizes = self.mode_sizes();
        if index.len() != sizes.len() || index.iter().zip(&sizes).any(|(i, d)| i >= d) {
            return Err(Error::IndexOutOfRange {
                index: index.to_vec(),
                shape: sizes,
            });
        }
        let mut prod = self.slice(0, index[0]);
        for (n, &i) in index.iter().enumerate().skip(1) {
            prod *= self.slice(n, i);
        }
        Ok(prod.trace())
    }

    /// Materializes the full tensor.
    pub fn to_dense(&self) -> DenseTensor {
        let c = chain(self.cores.iter());
        let r0 = c.left;
        let m = &c.mat;
        let data: Vec<f64> = (0..c.count)
            .map(|j| (0..r0).map(|a| m[(a + r0 * j, a)]).sum())
            .collect();
        DenseTensor::new(self.mode_sizes(), data).expect("ring shape is valid")
    }

    /// Squared Frobenius distance to `target`.
    pub fn objective(&self, target: &DenseTensor) -> Result<f64> {
        let dense = self.to_dense();
        if dense.shape() != target.shape() {
            return Err(Error::ShapeMismatch {
                expected: dense.shape().to_vec(),
                actual: target.shape().to_vec(),
            });
        }
        Ok(dense
            .data()
            .iter()
            .zip(target.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Fits the ring to `target` by alternating least squares, one exact
    /// least-squares core update at a time, for up to `opts.sweeps` sweeps.
    ///
    /// Stops early when a sweep lowers the objective by less than `opts.tol`
    /// relative, or once the fit is exact to working precision (relative
    /// residual at most `1e-12`; below that the objective is rounding noise).
    pub fn fit_als(&mut self, target: &DenseTensor, opts: &AlsOptions) -> Result<FitReport> {
        let sizes = self.mode_sizes();
        if sizes != target.shape() {
            return Err(Error::ShapeMismatch {
                expected: sizes,
                actual: target.shape().to_vec(),
            });
        }
        let n_modes = self.order();
        let unfoldings = (0..n_modes)
            .map(|n| target.unfold_mode(n).map(|m| m.transpose()))
            .collect::<Result<Vec<_>>>()?;
        let target_sq = target.squared_norm();
        let initial_objective = self.objective(target)?;
        let mut report = FitReport {
            initial_objective,
            objectives: Vec::with_capacity(opts.sweeps),
            core_objectives: Vec::with_capacity(opts.sweeps * n_modes),
        };
        let mut previous = initial_objective;
        for _ in 0..opts.sweeps {
            for n in 0..n_modes {
                let obj = self.update_core(n, &unfoldings[n])?;
                report.core_objectives.push(obj);
            }
            let current = *report.core_objectives.last().expect("at least one core");
            report.objectives.push(current);
            let scale = previous.max(f64::MIN_POSITIVE);
            if current <= EXACT_FIT * target_sq.max(f64::MIN_POSITIVE)
                || (previous - current) / scale < opts.tol
            {
                break;
            }
            previous = current;
        }
        Ok(report)
    }

    /// Solves for core `n` with the others fixed; returns the new objective.
    ///
    /// `unfolded_t` is the transposed mode-n unfolding of the target. The
    /// design matrix `B[j, beta + R_{n+1} * alpha] = Q_j[beta, alpha]` (with
    /// `Q_j` the subchain slice product) is never formed: `X_(n) B` is built
    /// block by block from the stacked chain and `B^T B` from the product of
    /// the other cores' transfer matrices.
    fn update_core(&mut self, n: usize, unfolded_t: &Matrix) -> Result<f64> {
        let n_modes = self.order();
        let (b0, size, b1) = core_dims(&self.cores[n]);
        let others = (1..n_modes).map(|k| (n + k) % n_modes);
        let sub = if n_modes == 1 {
            // empty subchain: the identity
            Chain {
                left: b1,
                count: 1,
                mat: Matrix::identity(b1, b0),
            }
        } else {
            chain(others.clone().map(|k| &self.cores[k]))
        };
        debug_assert_eq!(sub.left, b1);
        let count = sub.count;
        let width = b0 * b1;
        let col_len = b1 * count;
        let s = sub.mat.as_slice();
        // block alpha of the design is M_alpha^T, M_alpha = column alpha of the chain as b1 x count
        let block = |alpha: usize| DMatrixView::from_slice(&s[alpha * col_len..(alpha + 1) * col_len], b1, count);

        let mut rhs = Matrix::zeros(size, width);
        for alpha in 0..b0 {
            let prod = block(alpha) * unfolded_t;
            rhs.columns_mut(b1 * alpha, b1).tr_copy_from(&prod);
        }

        let transfer = if n_modes == 1 {
            Matrix::identity(b1 * b1, b0 * b0)
        } else {
            others
                .map(|k| transfer_matrix(&self.cores[k]))
                .reduce(|acc, e| acc * e)
                .expect("at least one other core")
        };
        let gram = Matrix::from_fn(width, width, |row, col| {
            let (beta, alpha) = (row % b1, row / b1);
            let (beta2, alpha2) = (col % b1, col / b1);
            transfer[(beta * b1 + beta2, alpha * b0 + alpha2)]
        });
        let solution = rhs * pseudo_inverse_psd(gram);
        if solution.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                ranks: self.ranks(),
            });
        }
        let core = self.cores[n].data_mut();
        for alpha in 0..b0 {
            for beta in 0..b1 {
                for i in 0..size {
                    core[alpha + b0 * (i + size * beta)] = solution[(i, beta + b1 * alpha)];
                }
            }
        }
        let mut approx_t = Matrix::zeros(count, size);
        for alpha in 0..b0 {
            let g = solution.columns(b1 * alpha, b1).transpose();
            approx_t.gemm_tr(1.0, &block(alpha), &g, 1.0);
        }
        Ok(unfolded_t
            .iter()
            .zip(approx_t.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Grows every bond by `step` (capped per bond by `caps` when given).
    /// Existing entries keep their place in the leading sub-block; new
    /// entries are zero-mean Gaussian with standard deviation
    /// `noise_scale * rms(core)`.
    pub fn increment_ranks<R: Rng + ?Sized>(
        &self,
        step: usize,
        noise_scale: f64,
        caps: Option<&[usize]>,
        rng: &mut R,
    ) -> Result<Self> {
        let n_modes = self.order();
        if let Some(c) = caps {
            if c.len() != n_modes {
                return Err(Error::InvalidConfig(format!(
                    "{} rank caps for a ring of order {n_modes}",
                    c.len()
                )));
            }
        }
        let old = self.bonds();
        let new: Vec<usize> = old
            .iter()
            .enumerate()
            .map(|(k, &r)| match caps {
                Some(c) => (r + step).min(c[k]).max(r),
                None => r + step,
            })
            .collect();
        let mut cores = Vec::with_capacity(n_modes);
        for (k, core) in self.cores.iter().enumerate() {
            let (r0, size, r1) = core_dims(core);
            let (n0, n1) = (new[k], new[(k + 1) % n_modes]);
            let rms = (core.squared_norm() / core.numel() as f64).sqrt();
            let sigma = noise_scale * if rms > 0.0 { rms } else { 1.0 };
            let src = core.data();
            let grown = DenseTensor::from_fn(vec![n0, size, n1], |idx| {
                let (a, i, b) = (idx[0], idx[1], idx[2]);
                if a < r0 && b < r1 {
                    src[a + r0 * (i + size * b)]
                } else if sigma == 0.0 {
                    0.0
                } else {
                    sigma * rng.sample::<f64, _>(StandardNormal)
                }
            })?;
            cores.push(grown);
        }
        Self::new(cores)
    }
}

/// `sum_i S_i (x) S_i` over the lateral slices of a core, indexed
/// `[alpha * a + alpha', beta * b + beta']`.
fn transfer_matrix(core: &DenseTensor) -> Matrix {
    let (a, size, b) = core_dims(core);
    let data = core.data();
    let mut e = Matrix::zeros(a * a, b * b);
    for i in 0..size {
        let slice = Matrix::from_fn(a, b, |r, c| data[r + a * (i + size * c)]);
        e += slice.kronecker(&slice);
    }
    e
}

/// Minimum-norm inverse of a symmetric positive semi-definite matrix.
/// Eigenvalues below `n * eps * lambda_max` are treated as zero.
fn pseudo_inverse_psd(gram: Matrix) -> Matrix {
    let n = gram.nrows();
    let eig = SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let threshold = lmax * n as f64 * f64::EPSILON;
    let mut scaled = eig.eigenvectors.clone();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let inv = if l > threshold { 1.0 / l } else { 0.0 };
        scaled.column_mut(k).scale_mut(inv);
    }
    scaled * eig.eigenvectors.transpose()
}
