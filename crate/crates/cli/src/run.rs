//! Batch execution and CSV reporting.

use std::path::{Path, PathBuf};

use trsr_core::metrics::{cnr, psnr, ssim, RoiSpec, SsimParams};
use trsr_core::{complete_masked, fuse_bscans, superres_pipeline, Matrix, PipelineOutput};

use crate::config::{ImageEntry, RunConfig};
use crate::error::{io_err, CliError, Result};
use crate::imageio::{load_image, write_image_as, BitDepth, ImageFormat, LoadedImage};
use crate::subsample::subsample_columns;

/// One CSV row. Metrics are `None` when disabled, when no reference or ROI
/// is available, or when the image failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRow {
    pub image: String,
    pub psnr_spline: Option<f64>,
    pub psnr_tr: Option<f64>,
    pub ssim_spline: Option<f64>,
    pub ssim_tr: Option<f64>,
    pub cnr_spline: Option<f64>,
    pub cnr_tr: Option<f64>,
    pub seed: u64,
    pub error: Option<String>,
    pub outputs: Vec<PathBuf>,
}

impl ImageRow {
    fn empty(image: String, seed: u64) -> Self {
        Self {
            image,
            psnr_spline: None,
            psnr_tr: None,
            ssim_spline: None,
            ssim_tr: None,
            cnr_spline: None,
            cnr_tr: None,
            seed,
            error: None,
            outputs: Vec::new(),
        }
    }

    fn metrics(&self) -> [Option<f64>; 6] {
        [
            self.psnr_spline,
            self.psnr_tr,
            self.ssim_spline,
            self.ssim_tr,
            self.cnr_spline,
            self.cnr_tr,
        ]
    }
}

/// Batch mean and population standard deviation per metric column, over
/// the rows where that metric exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: [Option<f64>; 6],
    pub std: [Option<f64>; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<ImageRow>,
    pub summary: Summary,
    pub csv_path: PathBuf,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &ImageRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

const COLUMNS: [&str; 6] = ["psnr_spline", "psnr_tr", "ssim_spline", "ssim_tr", "cnr_spline", "cnr_tr"];

fn summarize(rows: &[ImageRow]) -> Summary {
    let mut mean = [None; 6];
    let mut std = [None; 6];
    for k in 0..6 {
        let vals: Vec<f64> = rows.iter().filter_map(|r| r.metrics()[k]).collect();
        if vals.is_empty() {
            continue;
        }
        let n = vals.len() as f64;
        // shifted by the first value so that identical rows give exactly zero spread
        let m = vals[0] + vals.iter().map(|v| v - vals[0]).sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean[k] = Some(m);
        std[k] = Some(var.sqrt());
    }
    Summary { mean, std }
}

struct Reconstruction {
    output: PipelineOutput,
    depth: BitDepth,
    format: ImageFormat,
}

fn reconstruct(entry: &ImageEntry, cfg: &RunConfig) -> Result<Reconstruction> {
    let scans: Vec<LoadedImage> = entry.scans.iter().map(|p| load_image(p)).collect::<Result<_>>()?;
    let (depth, format) = (scans[0].depth, scans[0].format);
    let pixels: Vec<Matrix> = scans.into_iter().map(|s| s.pixels).collect();
    let config = cfg.superres.to_config(pixels.len(), cfg.seed)?;
    let output = match cfg.subsample {
        Some(sub) => {
            let parts = pixels
                .iter()
                .map(|p| subsample_columns(p, sub.missing_ratio, cfg.seed))
                .collect::<Result<Vec<_>>>()?;
            let kept: Vec<Matrix> = parts.iter().map(|p| p.kept.clone()).collect();
            let fused = fuse_bscans(&kept, &config.weights)?;
            let mask = parts[0].mask.clone();
            let mut full = Matrix::zeros(mask.rows(), mask.cols());
            for (j, c) in mask.observed_columns().into_iter().enumerate() {
                full.set_column(c, &fused.column(j));
            }
            complete_masked(&full, &mask, &config)?
        }
        None => superres_pipeline(&pixels, &config)?,
    };
    Ok(Reconstruction { output, depth, format })
}

fn process(entry: &ImageEntry, cfg: &RunConfig, roi: Option<&RoiSpec>) -> Result<ImageRow> {
    let name = entry.label();
    let rec = reconstruct(entry, cfg)?;
    let mut row = ImageRow::empty(name.clone(), cfg.seed);
    let out = &rec.output;
    if let Some(path) = &entry.reference {
        let reference = load_image(path)?;
        if reference.pixels.shape() != out.image.shape() {
            return Err(CliError::Config(format!(
                "reference {} is {:?} but the reconstruction is {:?}",
                path.display(),
                reference.pixels.shape(),
                out.image.shape()
            )));
        }
        let peak = reference.depth.max_value();
        if cfg.metrics.psnr {
            row.psnr_spline = Some(psnr(&reference.pixels, &out.spline, peak)?);
            row.psnr_tr = Some(psnr(&reference.pixels, &out.image, peak)?);
        }
        if cfg.metrics.ssim {
            let params = SsimParams::with_range(peak);
            row.ssim_spline = Some(ssim(&reference.pixels, &out.spline, &params)?);
            row.ssim_tr = Some(ssim(&reference.pixels, &out.image, &params)?);
        }
    }
    if let (Some(roi), true) = (roi, cfg.metrics.cnr) {
        row.cnr_spline = Some(cnr(&out.spline, roi)?);
        row.cnr_tr = Some(cnr(&out.image, roi)?);
    }
    let ext = rec.format.extension();
    for (suffix, img) in [("tr", &out.image), ("spline", &out.spline)] {
        let path = cfg.out_dir.join(format!("{name}_{suffix}.{ext}"));
        write_image_as(&path, img, rec.depth, rec.format)?;
        row.outputs.push(path);
    }
    Ok(row)
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, rows: &[ImageRow], summary: &Summary, active: &[usize], seed: u64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["image"];
    header.extend(active.iter().map(|&k| COLUMNS[k]));
    header.push("seed");
    w.write_record(&header)?;
    let mut emit = |label: &str, vals: [Option<f64>; 6], seed: u64| -> Result<()> {
        let mut rec = vec![label.to_string()];
        rec.extend(active.iter().map(|&k| fmt(vals[k])));
        rec.push(seed.to_string());
        w.write_record(&rec)?;
        Ok(())
    };
    for r in rows {
        emit(&r.image, r.metrics(), r.seed)?;
    }
    emit("mean", summary.mean, seed)?;
    emit("std", summary.std, seed)?;
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Runs every image of the batch and writes `report.csv`, the
/// reconstructions (`<name>_tr`) and the spline baselines (`<name>_spline`)
/// to `out_dir`. A failing image is recorded in its row and in
/// `errors.txt`; the remaining images still run.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.check()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;
    let roi = cfg.roi.as_ref().map(|r| r.to_spec());
    let rows: Vec<ImageRow> = cfg
        .images
        .iter()
        .map(|entry| {
            process(entry, cfg, roi.as_ref()).unwrap_or_else(|e| {
                let mut row = ImageRow::empty(entry.label(), cfg.seed);
                row.error = Some(e.to_string());
                row
            })
        })
        .collect();

    let mut active = Vec::new();
    if cfg.metrics.psnr {
        active.extend([0, 1]);
    }
    if cfg.metrics.ssim {
        active.extend([2, 3]);
    }
    if cfg.metrics.cnr && roi.is_some() {
        active.extend([4, 5]);
    }
    let summary = summarize(&rows);
    let csv_path = cfg.out_dir.join("report.csv");
    write_csv(&csv_path, &rows, &summary, &active, cfg.seed)?;

    let errors_path = cfg.out_dir.join("errors.txt");
    let errors: String = rows
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}\n", r.image)))
        .collect();
    if errors.is_empty() {
        if errors_path.exists() {
            std::fs::remove_file(&errors_path).map_err(io_err(&errors_path))?;
        }
    } else {
        std::fs::write(&errors_path, errors).map_err(io_err(&errors_path))?;
    }
    Ok(Report { rows, summary, csv_path })
}
