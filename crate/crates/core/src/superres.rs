//! Column super-resolution by tensor ring completion in the overlapped
//! patch-Hankel embedded space.
//!
//! For each configured patch size the image is embedded, a tensor ring is
//! fitted to the embedded tensor with the observed entries clamped to the
//! data and the unobserved entries taken from the previous estimate, the fit
//! is mapped back to image space, smoothed at the unobserved pixels and
//! merged with the observed columns. Ranks grow by one step per round until
//! they pass the rank limit or the observed-entry residual is small enough.
//! The per-patch results are averaged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hankel::HankelPlan;
use crate::ring::{AlsOptions, FitReport, RankSchedule, TensorRing};
use crate::spline::interpolate_columns;
use crate::tensor::DenseTensor;
use crate::Matrix;

/// Column observation mask: whole columns (A-scans) are observed or missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    observed: Vec<bool>,
}

impl Mask {
    pub fn from_columns(rows: usize, observed: Vec<bool>) -> Result<Self> {
        if rows == 0 || observed.is_empty() {
            return Err(Error::InvalidShape {
                shape: vec![rows, observed.len()],
                reason: "mask must be non-empty".into(),
            });
        }
        if !observed.iter().any(|&o| o) {
            return Err(Error::InvalidConfig("mask has no observed column".into()));
        }
        Ok(Self { rows, observed })
    }

    pub fn all_observed(rows: usize, cols: usize) -> Result<Self> {
        Self::from_columns(rows, vec![true; cols])
    }

    /// Columns `0, ratio, 2 * ratio, ...` observed.
    pub fn strided(rows: usize, cols: usize, ratio: usize) -> Result<Self> {
        if ratio == 0 {
            return Err(Error::InvalidConfig("ratio must be at least 1".into()));
        }
        Self::from_columns(rows, (0..cols).map(|c| c % ratio == 0).collect())
    }

    /// Reads a column mask back from a 0/1 (or 0/nonzero) matrix.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let mut observed = Vec::with_capacity(m.ncols());
        for c in 0..m.ncols() {
            let col = m.column(c);
            let on = col[0] != 0.0;
            if col.iter().any(|&v| (v != 0.0) != on) {
                return Err(Error::InvalidConfig(format!(
                    "mask column {c} is not constant"
                )));
            }
            observed.push(on);
        }
        Self::from_columns(m.nrows(), observed)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.observed.len()
    }

    pub fn is_observed(&self, col: usize) -> bool {
        self.observed[col]
    }

    pub fn columns(&self) -> &[bool] {
        &self.observed
    }

    pub fn observed_columns(&self) -> Vec<usize> {
        (0..self.cols()).filter(|&c| self.observed[c]).collect()
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols(), |_, c| {
            if self.observed[c] {
                1.0
            } else {
                0.0
            }
        })
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.shape() != (self.rows, self.cols()) {
            return Err(Error::ShapeMismatch {
                expected: vec![self.rows, self.cols()],
                actual: vec![x.nrows(), x.ncols()],
            });
        }
        Ok(())
    }

    /// `self * observed + (1 - self) * estimate`.
    pub fn merge(&self, observed: &Matrix, estimate: &Matrix) -> Result<Matrix> {
        self.check(observed)?;
        self.check(estimate)?;
        let mut out = estimate.clone();
        for c in self.observed_columns() {
            out.set_column(c, &observed.column(c));
        }
        Ok(out)
    }

    /// `||mask * (a - b)||_F / ||mask * a||_F`, zero when the denominator is.
    pub fn relative_residual(&self, reference: &Matrix, estimate: &Matrix) -> Result<f64> {
        self.check(reference)?;
        self.check(estimate)?;
        let (mut num, mut den) = (0.0, 0.0);
        for c in self.observed_columns() {
            for (a, b) in reference.column(c).iter().zip(estimate.column(c).iter()) {
                num += (a - b) * (a - b);
                den += a * a;
            }
        }
        Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
    }
}

/// Weighted sum of B-scans, `sum_i w_i X_i` with `sum_i w_i <= 1`.
pub fn fuse_bscans(scans: &[Matrix], weights: &[f64]) -> Result<Matrix> {
    let first = scans
        .first()
        .ok_or_else(|| Error::InvalidConfig("no B-scans to fuse".into()))?;
    if weights.len() != scans.len() {
        return Err(Error::InvalidConfig(format!(
            "{} weights for {} B-scans",
            weights.len(),
            scans.len()
        )));
    }
    check_weights(weights)?;
    let mut out = Matrix::zeros(first.nrows(), first.ncols());
    for (scan, &w) in scans.iter().zip(weights) {
        if scan.shape() != first.shape() {
            return Err(Error::ShapeMismatch {
                expected: vec![first.nrows(), first.ncols()],
                actual: vec![scan.nrows(), scan.ncols()],
            });
        }
        out += scan * w;
    }
    Ok(out)
}

fn check_weights(weights: &[f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || sum > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "B-scan weights {weights:?} must be nonnegative with sum at most 1"
        )));
    }
    Ok(())
}

/// Spline-upsampled image and its observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineInit {
    pub image: Matrix,
    pub mask: Mask,
    pub linear_fallback: bool,
}

/// Widens `xl` by `ratio`, placing its columns at stride `ratio` from column
/// zero and filling the gaps by row-wise cubic spline.
pub fn spline_init(xl: &Matrix, ratio: usize) -> Result<SplineInit> {
    spline_init_to_width(xl, ratio, xl.ncols() * ratio)
}

/// Like [`spline_init`] with an explicit output width (at least
/// `(cols - 1) * ratio + 1`).
pub fn spline_init_to_width(xl: &Matrix, ratio: usize, width: usize) -> Result<SplineInit> {
    if ratio == 0 {
        return Err(Error::InvalidConfig("ratio must be at least 1".into()));
    }
    if xl.ncols() == 0 || (xl.ncols() - 1) * ratio >= width {
        return Err(Error::InvalidConfig(format!(
            "width {width} cannot hold {} columns at stride {ratio}",
            xl.ncols()
        )));
    }
    let positions: Vec<usize> = (0..xl.ncols()).map(|k| k * ratio).collect();
    let interp = interpolate_columns(xl, &positions, width)?;
    let mut observed = vec![false; width];
    for &p in &positions {
        observed[p] = true;
    }
    Ok(SplineInit {
        image: interp.image,
        mask: Mask::from_columns(xl.nrows(), observed)?,
        linear_fallback: interp.linear_fallback,
    })
}

/// Spline fill of the unobserved columns of a full-width image.
pub fn spline_fill(x: &Matrix, mask: &Mask) -> Result<SplineInit> {
    mask.check(x)?;
    let positions = mask.observed_columns();
    let samples = x.select_columns(&positions);
    let interp = interpolate_columns(&samples, &positions, x.ncols())?;
    Ok(SplineInit {
        image: interp.image,
        mask: mask.clone(),
        linear_fallback: interp.linear_fallback,
    })
}

/// Replaces every unobserved pixel by the mean of its in-bounds 8-neighbours
/// (read from the input, not progressively), leaving observed pixels alone.
pub fn smooth_estimated(x: &Matrix, mask: &Mask) -> Result<Matrix> {
    mask.check(x)?;
    let (rows, cols) = x.shape();
    let mut out = x.clone();
    for c in (0..cols).filter(|&c| !mask.is_observed(c)) {
        for r in 0..rows {
            let (mut sum, mut n) = (0.0, 0usize);
            for dc in -1isize..=1 {
                for dr in -1isize..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr >= 0 && cc >= 0 && (rr as usize) < rows && (cc as usize) < cols {
                        sum += x[(rr as usize, cc as usize)];
                        n += 1;
                    }
                }
            }
            if n > 0 {
                out[(r, c)] = sum / n as f64;
            }
        }
    }
    Ok(out)
}

/// One patch size of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    pub patch: usize,
    pub overlap: usize,
}

/// Reduced-weight fusion for a band of mostly-noise rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRegion {
    /// Half-open row range `[start, end)`.
    pub rows: (usize, usize),
    /// Weight sum used inside the band (below 1, e.g. 0.95).
    pub weight_sum: f64,
    /// Patch sizes the reduced weighting applies to.
    pub patch_sizes: Vec<usize>,
}

/// Settings shared by every patch run.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionOptions {
    pub window: [usize; 2],
    pub schedule: RankSchedule,
    /// Optional per-bond rank caps.
    pub rank_caps: Option<Vec<usize>>,
    pub als: AlsOptions,
    /// Scale of the random padding added when ranks grow.
    pub noise_scale: f64,
    /// Stop once the observed-entry relative residual drops to this value.
    pub accuracy: f64,
    pub smoothing: bool,
    pub seed: u64,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        Self {
            window: [2, 2],
            schedule: RankSchedule {
                initial: vec![3; 6],
                max_rank: 8,
                step: 1,
            },
            rank_caps: None,
            als: AlsOptions::default(),
            noise_scale: 1e-2,
            accuracy: 1e-3,
            smoothing: true,
            seed: 0,
        }
    }
}

/// Full parameter set of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperResConfig {
    pub patches: Vec<PatchSpec>,
    /// Super-resolution ratio: output width is `ratio` times the input width.
    pub ratio: usize,
    /// B-scan fusion weights, one per input scan.
    pub weights: Vec<f64>,
    pub noise_region: Option<NoiseRegion>,
    pub completion: CompletionOptions,
}

impl Default for SuperResConfig {
    fn default() -> Self {
        Self {
            patches: vec![PatchSpec {
                patch: 7,
                overlap: 4,
            }],
            ratio: 2,
            weights: vec![1.0],
            noise_region: None,
            completion: CompletionOptions::default(),
        }
    }
}

impl SuperResConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patches.is_empty() {
            return Err(Error::InvalidConfig("at least one patch size is required".into()));
        }
        if self.ratio == 0 {
            return Err(Error::InvalidConfig("ratio must be at least 1".into()));
        }
        check_weights(&self.weights)?;
        if self.completion.schedule.initial.len() != 6 {
            return Err(Error::InvalidConfig(format!(
                "the embedded tensor has 6 bonds, got initial ranks {:?}",
                self.completion.schedule.initial
            )));
        }
        RankSchedule::new(
            self.completion.schedule.initial.clone(),
            self.completion.schedule.max_rank,
            self.completion.schedule.step,
        )?;
        if let Some(caps) = &self.completion.rank_caps {
            if caps.len() != 6 {
                return Err(Error::InvalidConfig("rank caps need 6 entries".into()));
            }
        }
        if let Some(nr) = &self.noise_region {
            if nr.rows.0 >= nr.rows.1 || !(0.0..=1.0).contains(&nr.weight_sum) {
                return Err(Error::InvalidConfig(format!("invalid noise region {nr:?}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one rank level.
#[derive(Debug, Clone, PartialEq)]
pub struct RankLevel {
    pub bonds: Vec<usize>,
    pub fit: FitReport,
    /// Observed-entry relative residual of the de-embedded fit.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchRun {
    pub spec: PatchSpec,
    /// Observed columns from the input, unobserved from the final estimate.
    pub image: Matrix,
    pub levels: Vec<RankLevel>,
}

/// Rank-incremental completion for one patch size.
///
/// `x0` is the initialization (observed columns hold the data); the result
/// keeps those columns untouched.
pub fn superres_single_patch(
    x0: &Matrix,
    mask: &Mask,
    spec: PatchSpec,
    opts: &CompletionOptions,
) -> Result<PatchRun> {
    mask.check(x0)?;
    let plan = HankelPlan::new(x0.nrows(), x0.ncols(), spec.patch, spec.overlap, opts.window)?;
    let shape = plan.embedded_shape();
    if opts.schedule.initial.len() != shape.len() {
        return Err(Error::InvalidConfig(format!(
            "initial ranks {:?} do not match the embedded order {}",
            opts.schedule.initial,
            shape.len()
        )));
    }
    let mask_h = plan.embed(&mask.to_matrix())?;
    let observed = x0.clone();
    let mut x = x0.clone();
    let mut previous = plan.embed(x0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut ring = TensorRing::random(&shape, &opts.schedule.initial, &mut rng)?;
    let mut levels = Vec::new();
    while ring.max_rank() <= opts.schedule.max_rank {
        let x_h = plan.embed(&x)?;
        // observed entries from the data, the rest from the previous estimate
        let target = DenseTensor::new(
            shape.to_vec(),
            x_h.data()
                .iter()
                .zip(previous.data())
                .zip(mask_h.data())
                .map(|((&d, &p), &m)| m * d + (1.0 - m) * p)
                .collect(),
        )?;
        let fit = ring.fit_als(&target, &opts.als)?;
        let estimate_h = ring.to_dense();
        if !estimate_h.is_finite() {
            return Err(Error::NonFinite {
                ranks: ring.ranks(),
            });
        }
        let mut estimate = plan.reconstruct(&estimate_h)?;
        let residual = mask.relative_residual(&observed, &estimate)?;
        if opts.smoothing {
            estimate = smooth_estimated(&estimate, mask)?;
        }
        x = mask.merge(&x, &estimate)?;
        previous = estimate_h;
        levels.push(RankLevel {
            bonds: ring.bonds(),
            fit,
            residual,
        });
        if residual <= opts.accuracy {
            break;
        }
        let grown = ring.increment_ranks(
            opts.schedule.step,
            opts.noise_scale,
            opts.rank_caps.as_deref(),
            &mut rng,
        )?;
        if grown.bonds() == ring.bonds() {
            break;
        }
        ring = grown;
    }
    Ok(PatchRun {
        spec,
        image: x,
        levels,
    })
}

/// Everything the pipeline produced, in input intensity units.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Ensemble average of the per-patch results.
    pub image: Matrix,
    /// Spline-only upsampling of the fused input (the pipeline's initialization).
    pub spline: Matrix,
    /// Fused input placed at its full-width positions.
    pub fused: Matrix,
    pub mask: Mask,
    pub runs: Vec<PatchRun>,
    pub linear_fallback: bool,
}

/// Affine map of intensities onto `[0, 1]`.
#[derive(Debug, Clone, Copy)]
struct Normalization {
    offset: f64,
    scale: f64,
}

impl Normalization {
    fn fit(x: &Matrix) -> Self {
        let lo = x.min();
        let hi = x.max();
        let span = hi - lo;
        Self {
            offset: lo,
            scale: if span > 0.0 && span.is_finite() { span } else { 1.0 },
        }
    }

    fn apply(&self, x: &Matrix) -> Matrix {
        x.map(|v| (v - self.offset) / self.scale)
    }

    fn invert(&self, x: &Matrix) -> Matrix {
        x.map(|v| v * self.scale + self.offset)
    }
}

/// Fuses `scans`, upsamples their columns by `config.ratio` and runs the
/// completion ensemble.
pub fn superres_pipeline(scans: &[Matrix], config: &SuperResConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let fused = fuse_bscans(scans, &config.weights)?;
    let width = fused.ncols() * config.ratio;
    let mask = Mask::strided(fused.nrows(), width, config.ratio)?;
    let mut full = Matrix::zeros(fused.nrows(), width);
    for k in 0..fused.ncols() {
        full.set_column(k * config.ratio, &fused.column(k));
    }
    complete_masked(&full, &mask, config)
}

/// Ensemble completion of an image whose unobserved columns (per `mask`)
/// carry no information. Fusion weights are not applied here; the noise
/// band scaling is relative to their sum.
pub fn complete_masked(observed: &Matrix, mask: &Mask, config: &SuperResConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let init = spline_fill(observed, mask)?;
    let fused = mask.merge(observed, &Matrix::zeros(observed.nrows(), observed.ncols()))?;
    let weight_sum: f64 = config.weights.iter().sum();
    let mut runs = Vec::with_capacity(config.patches.len());
    for &spec in &config.patches {
        let input = match &config.noise_region {
            Some(nr) if nr.patch_sizes.contains(&spec.patch) && weight_sum > 0.0 => {
                let factor = nr.weight_sum / weight_sum;
                let mut scaled = fused.clone();
                let end = nr.rows.1.min(scaled.nrows());
                for r in nr.rows.0.min(end)..end {
                    scaled.row_mut(r).scale_mut(factor);
                }
                scaled
            }
            _ => fused.clone(),
        };
        let start = if input == fused {
            init.image.clone()
        } else {
            spline_fill(&input, mask)?.image
        };
        let norm = Normalization::fit(&start);
        let mut x0 = norm.apply(&start);
        if config.completion.smoothing {
            x0 = smooth_estimated(&x0, mask)?;
        }
        let mut run = superres_single_patch(&x0, mask, spec, &config.completion).map_err(|e| Error::Patch {
            patch: spec.patch,
            source: Box::new(e),
        })?;
        // observed columns come back bit-exact from the input
        run.image = mask.merge(&input, &norm.invert(&run.image))?;
        runs.push(run);
    }
    let mut image = Matrix::zeros(observed.nrows(), observed.ncols());
    for run in &runs {
        image += &run.image;
    }
    image /= runs.len() as f64;
    Ok(PipelineOutput {
        image,
        spline: init.image,
        fused,
        mask: mask.clone(),
        runs,
        linear_fallback: init.linear_fallback,
    })
}
