//! Front end for the `trsr` binary: run configuration, image and tensor
//! file formats, column subsampling and batch reports.

mod config;
mod error;
mod imageio;
mod run;
mod subsample;
mod tensor_io;

pub use config::{ImageEntry, MetricToggles, RoiConfig, RunConfig, SubsampleConfig, SuperResSection};
pub use error::{CliError, Result};
pub use imageio::{load_image, write_image, write_image_as, BitDepth, ImageFormat, LoadedImage};
pub use run::{run, ImageRow, Report, Summary};
pub use subsample::{subsample_columns, Subsampled};
pub use tensor_io::{parse_tensor, read_tensor, render_tensor, write_tensor};
