//! Image column super-resolution by tensor ring completion in an overlapped
//! patch-Hankel embedded space.
//!
//! - [`tensor`]: dense N-way arrays, unfoldings, elementwise products.
//! - [`ring`]: tensor ring format, ALS fitting and rank growth.
//! - [`hankel`]: overlapped patch Hankelization and its inverse.
//! - [`superres`]: B-scan fusion, spline initialization and the
//!   rank-incremental completion ensemble.
//! - [`metrics`]: PSNR, SSIM and CNR.

pub mod error;
pub mod hankel;
pub mod metrics;
pub mod ring;
pub mod spline;
pub mod superres;
pub mod tensor;

/// Column-major dense matrix used for images and unfoldings.
pub type Matrix = nalgebra::DMatrix<f64>;

pub use error::{Error, Result};
pub use hankel::HankelPlan;
pub use metrics::{cnr, psnr, ssim, Rect, RoiSpec, SsimParams};
pub use ring::{AlsOptions, FitReport, RankSchedule, TensorRing};
pub use superres::{
    complete_masked, fuse_bscans, smooth_estimated, spline_fill, spline_init, spline_init_to_width,
    superres_pipeline, superres_single_patch, CompletionOptions, Mask, NoiseRegion, PatchRun,
    PatchSpec, PipelineOutput, RankLevel, SplineInit, SuperResConfig,
};
pub use tensor::DenseTensor;
