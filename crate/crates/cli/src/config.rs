//! TOML run configuration.
//!
//! ```toml
//! out_dir = "results"        # relative to this file
//! seed = 0
//!
//! [[images]]
//! name = "scan01"            # optional, defaults to the first scan's file stem
//! scans = ["scan01.png"]     # B-scans of one location, fused with `superres.weights`
//! reference = "full01.png"   # optional ground truth for PSNR and SSIM
//!
//! [subsample]                # optional: drop columns before reconstruction
//! missing_ratio = 0.5
//!
//! [superres]
//! patches = [7, 5]
//! overlaps = [4, 2]
//! window = [2, 2]
//! initial_rank = 3           # one value for all bonds, or a list of 6
//! max_rank = 6
//! ratio = 2                  # ignored when [subsample] is present
//!
//! [roi]                      # optional, rectangles are [row, col, height, width]
//! foreground = [[10, 10, 8, 8]]
//! background = [40, 40, 8, 8]
//!
//! [metrics]
//! psnr = true
//! ssim = true
//! cnr = true
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use trsr_core::{
    AlsOptions, CompletionOptions, NoiseRegion, PatchSpec, RankSchedule, Rect, RoiSpec, SuperResConfig,
};

use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub images: Vec<ImageEntry>,
    #[serde(default)]
    pub subsample: Option<SubsampleConfig>,
    #[serde(default)]
    pub superres: SuperResSection,
    #[serde(default)]
    pub roi: Option<RoiConfig>,
    #[serde(default)]
    pub metrics: MetricToggles,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageEntry {
    #[serde(default)]
    pub name: Option<String>,
    pub scans: Vec<PathBuf>,
    #[serde(default)]
    pub reference: Option<PathBuf>,
}

impl ImageEntry {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.scans
                .first()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleConfig {
    pub missing_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Ranks {
    Uniform(usize),
    PerBond(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseRegionConfig {
    pub rows: [usize; 2],
    pub weight_sum: f64,
    pub patch_sizes: Vec<usize>,
}

/// Pipeline parameters. Omitted keys take the library defaults.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuperResSection {
    pub patches: Vec<usize>,
    pub overlaps: Vec<usize>,
    pub window: [usize; 2],
    pub initial_rank: Ranks,
    pub max_rank: usize,
    pub rank_step: usize,
    pub rank_caps: Option<Vec<usize>>,
    pub ratio: usize,
    pub weights: Option<Vec<f64>>,
    pub smoothing: bool,
    pub sweeps: usize,
    pub tol: f64,
    pub noise_scale: f64,
    pub accuracy: f64,
    pub noise_region: Option<NoiseRegionConfig>,
}

impl Default for SuperResSection {
    fn default() -> Self {
        let lib = SuperResConfig::default();
        let c = &lib.completion;
        Self {
            patches: lib.patches.iter().map(|p| p.patch).collect(),
            overlaps: lib.patches.iter().map(|p| p.overlap).collect(),
            window: c.window,
            initial_rank: Ranks::PerBond(c.schedule.initial.clone()),
            max_rank: c.schedule.max_rank,
            rank_step: c.schedule.step,
            rank_caps: c.rank_caps.clone(),
            ratio: lib.ratio,
            weights: None,
            smoothing: c.smoothing,
            sweeps: c.als.sweeps,
            tol: c.als.tol,
            noise_scale: c.noise_scale,
            accuracy: c.accuracy,
            noise_region: None,
        }
    }
}

impl SuperResSection {
    /// Library config for a location with `scans` B-scans. Missing weights
    /// default to the plain mean.
    pub fn to_config(&self, scans: usize, seed: u64) -> Result<SuperResConfig> {
        if self.patches.len() != self.overlaps.len() {
            return Err(CliError::Config(format!(
                "{} patch sizes but {} overlaps",
                self.patches.len(),
                self.overlaps.len()
            )));
        }
        let initial = match &self.initial_rank {
            Ranks::Uniform(r) => vec![*r; 6],
            Ranks::PerBond(r) => r.clone(),
        };
        let weights = match &self.weights {
            Some(w) => w.clone(),
            None => vec![1.0 / scans.max(1) as f64; scans],
        };
        let config = SuperResConfig {
            patches: self
                .patches
                .iter()
                .zip(&self.overlaps)
                .map(|(&patch, &overlap)| PatchSpec { patch, overlap })
                .collect(),
            ratio: self.ratio,
            weights,
            noise_region: self.noise_region.as_ref().map(|n| NoiseRegion {
                rows: (n.rows[0], n.rows[1]),
                weight_sum: n.weight_sum,
                patch_sizes: n.patch_sizes.clone(),
            }),
            completion: CompletionOptions {
                window: self.window,
                schedule: RankSchedule::new(initial, self.max_rank, self.rank_step)?,
                rank_caps: self.rank_caps.clone(),
                als: AlsOptions {
                    sweeps: self.sweeps,
                    tol: self.tol,
                },
                noise_scale: self.noise_scale,
                accuracy: self.accuracy,
                smoothing: self.smoothing,
                seed,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiConfig {
    pub foreground: Vec<[usize; 4]>,
    pub background: [usize; 4],
}

impl RoiConfig {
    pub fn to_spec(&self) -> RoiSpec {
        let rect = |r: &[usize; 4]| Rect::new(r[0], r[1], r[2], r[3]);
        RoiSpec {
            foreground: self.foreground.iter().map(rect).collect(),
            background: rect(&self.background),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricToggles {
    pub psnr: bool,
    pub ssim: bool,
    pub cnr: bool,
}

impl Default for MetricToggles {
    fn default() -> Self {
        Self {
            psnr: true,
            ssim: true,
            cnr: true,
        }
    }
}

impl RunConfig {
    /// Parses `text`; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> std::result::Result<Self, toml::de::Error> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.out_dir);
        for img in &mut cfg.images {
            img.scans.iter_mut().for_each(resolve);
            if let Some(r) = img.reference.as_mut() {
                resolve(r);
            }
        }
        Ok(cfg)
    }

    /// Reads and checks a config file. Every referenced input must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base).map_err(|source| CliError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        for img in &self.images {
            if img.scans.is_empty() {
                return Err(CliError::Config(format!("image {:?} lists no scans", img.label())));
            }
            for p in img.scans.iter().chain(&img.reference) {
                if !p.is_file() {
                    return Err(CliError::Config(format!("{} does not exist", p.display())));
                }
            }
        }
        if let Some(s) = self.subsample {
            if !(0.0..1.0).contains(&s.missing_ratio) {
                return Err(CliError::Config(format!(
                    "missing_ratio must lie in [0, 1), got {}",
                    s.missing_ratio
                )));
            }
        }
        if let Some(roi) = &self.roi {
            if roi.foreground.is_empty() {
                return Err(CliError::Config("roi.foreground is empty".into()));
            }
        }
        self.superres.to_config(1, self.seed)?;
        Ok(())
    }
}
