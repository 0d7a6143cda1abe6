//! Grayscale PNG and binary PGM reading and writing.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use trsr_core::Matrix;

use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Pgm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "pgm" | "pnm" => Some(ImageFormat::Pgm),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Pgm => "pgm",
        }
    }
}

/// A grayscale image in its source intensity units.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedImage {
    pub pixels: Matrix,
    pub depth: BitDepth,
    pub format: ImageFormat,
}

fn unsupported(path: &Path) -> CliError {
    CliError::Config(format!("{}: only .png and .pgm images are supported", path.display()))
}

/// Loads a PNG or PGM as a grayscale matrix. Color images are reduced to luma
/// at their own bit depth.
pub fn load_image(path: &Path) -> Result<LoadedImage> {
    let format = ImageFormat::from_path(path).ok_or_else(|| unsupported(path))?;
    let img = image::open(path).map_err(|source| CliError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let sixteen = matches!(
        img,
        DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
            | DynamicImage::ImageRgb16(_)
            | DynamicImage::ImageRgba16(_)
            | DynamicImage::ImageRgb32F(_)
            | DynamicImage::ImageRgba32F(_)
    );
    let (pixels, depth) = if sixteen {
        let luma = img.into_luma16();
        (Matrix::from_fn(h, w, |r, c| luma.get_pixel(c as u32, r as u32)[0] as f64), BitDepth::Sixteen)
    } else {
        let luma = img.into_luma8();
        (Matrix::from_fn(h, w, |r, c| luma.get_pixel(c as u32, r as u32)[0] as f64), BitDepth::Eight)
    };
    Ok(LoadedImage { pixels, depth, format })
}

fn quantize(v: f64, max: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.round().clamp(0.0, max)
    }
}

/// Writes `pixels` rounded and clamped to the range of `depth`, with the
/// format taken from the file extension.
pub fn write_image(path: &Path, pixels: &Matrix, depth: BitDepth) -> Result<()> {
    let format = ImageFormat::from_path(path).ok_or_else(|| unsupported(path))?;
    write_image_as(path, pixels, depth, format)
}

pub fn write_image_as(path: &Path, pixels: &Matrix, depth: BitDepth, format: ImageFormat) -> Result<()> {
    let (h, w) = pixels.shape();
    let max = depth.max_value();
    // row-major samples
    let samples: Vec<u16> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .map(|(r, c)| quantize(pixels[(r, c)], max) as u16)
        .collect();
    let image_err = |source| CliError::Image {
        path: path.to_path_buf(),
        source,
    };
    match format {
        ImageFormat::Png => match depth {
            BitDepth::Eight => {
                let bytes: Vec<u8> = samples.iter().map(|&v| v as u8).collect();
                ImageBuffer::<Luma<u8>, _>::from_raw(w as u32, h as u32, bytes)
                    .expect("buffer size matches dimensions")
                    .save_with_format(path, image::ImageFormat::Png)
                    .map_err(image_err)
            }
            BitDepth::Sixteen => ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, samples)
                .expect("buffer size matches dimensions")
                .save_with_format(path, image::ImageFormat::Png)
                .map_err(image_err),
        },
        ImageFormat::Pgm => {
            // binary P5; 16-bit samples are big-endian
            let mut bytes = format!("P5\n{w} {h}\n{}\n", max as u32).into_bytes();
            match depth {
                BitDepth::Eight => bytes.extend(samples.iter().map(|&v| v as u8)),
                BitDepth::Sixteen => bytes.extend(samples.iter().flat_map(|v| v.to_be_bytes())),
            }
            std::fs::write(path, bytes).map_err(io_err(path))
        }
    }
}
