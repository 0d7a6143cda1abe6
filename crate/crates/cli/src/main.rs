use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trsr_cli::{
    load_image, read_tensor, run, subsample_columns, write_image, write_tensor, RunConfig, SubsampleConfig,
};
use trsr_core::metrics::{cnr, psnr, ssim, SsimParams};
use trsr_core::{AlsOptions, HankelPlan, TensorRing};

#[derive(Parser)]
#[command(name = "trsr", version, about = "Column super-resolution of images by tensor ring completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drop image columns; writes the kept columns and the full-width mask.
    Subsample {
        image: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        missing_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a configured batch and write report.csv plus output images.
    Superres {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Subsample the inputs first (overrides the config).
        #[arg(long)]
        missing_ratio: Option<f64>,
        /// Super-resolution ratio for inputs that are not subsampled.
        #[arg(long)]
        ratio: Option<usize>,
    },
    /// Print the embedded tensor shape of an image and its round-trip error.
    Hankelize {
        image: PathBuf,
        #[arg(long, default_value_t = 7)]
        patch: usize,
        #[arg(long, default_value_t = 4)]
        overlap: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,2")]
        window: Vec<usize>,
        /// Also write the embedded tensor in text form to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a test image with a reference; prints one CSV row.
    Metrics {
        reference: PathBuf,
        test: PathBuf,
        /// Run config whose [roi] section defines the CNR regions.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit a tensor ring at fixed ranks to a tensor text file and print the
    /// objective after every sweep.
    Decompose {
        tensor: PathBuf,
        #[arg(long, value_delimiter = ',')]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        sweeps: usize,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the reconstruction to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Subsample {
            image,
            missing_ratio,
            seed,
            out,
        } => {
            let img = load_image(&image)?;
            let sub = subsample_columns(&img.pixels, missing_ratio, seed)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let ext = img.format.extension();
            let kept = out.join(format!("{}_kept.{ext}", stem(&image)));
            let mask = out.join(format!("{}_mask.{ext}", stem(&image)));
            write_image(&kept, &sub.kept, img.depth)?;
            write_image(&mask, &(sub.mask.to_matrix() * img.depth.max_value()), img.depth)?;
            println!("kept {} of {} columns", sub.mask.observed_count(), sub.mask.cols());
            println!("{}\n{}", kept.display(), mask.display());
        }
        Command::Superres {
            config,
            seed,
            out,
            missing_ratio,
            ratio,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            if let Some(m) = missing_ratio {
                cfg.subsample = Some(SubsampleConfig { missing_ratio: m });
            }
            if let Some(l) = ratio {
                cfg.superres.ratio = l;
            }
            let report = run(&cfg)?;
            for row in report.failures() {
                eprintln!("{}: {}", row.image, row.error.as_deref().unwrap_or_default());
            }
            println!("{}", report.csv_path.display());
            if report.failures().count() == report.rows.len() && !report.rows.is_empty() {
                bail!("every image failed");
            }
        }
        Command::Hankelize {
            image,
            patch,
            overlap,
            window,
            out,
        } => {
            let [t1, t2] = window[..] else {
                bail!("--window needs two values, got {window:?}");
            };
            let img = load_image(&image)?;
            let (rows, cols) = img.pixels.shape();
            let plan = HankelPlan::new(rows, cols, patch, overlap, [t1, t2])?;
            let t = plan.embed(&img.pixels)?;
            let back = plan.reconstruct(&t)?;
            let err = (&back - &img.pixels).abs().max();
            let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
            println!("shape: {}", shape.join(" "));
            println!("elements: {}", t.numel());
            println!("round_trip_max_abs_error: {err:e}");
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("{}_hankel.txt", stem(&image)));
                write_tensor(&path, &t)?;
                println!("{}", path.display());
            }
        }
        Command::Metrics { reference, test, config } => {
            let r = load_image(&reference)?;
            let t = load_image(&test)?;
            let peak = r.depth.max_value();
            let p = psnr(&r.pixels, &t.pixels, peak)?;
            let s = ssim(&r.pixels, &t.pixels, &SsimParams::with_range(peak))?;
            let roi = match config {
                Some(path) => RunConfig::load(&path)?.roi.map(|r| r.to_spec()),
                None => None,
            };
            match roi {
                Some(roi) => {
                    println!("psnr,ssim,cnr_reference,cnr_test");
                    println!("{p},{s},{},{}", cnr(&r.pixels, &roi)?, cnr(&t.pixels, &roi)?);
                }
                None => {
                    println!("psnr,ssim");
                    println!("{p},{s}");
                }
            }
        }
        Command::Decompose {
            tensor,
            ranks,
            sweeps,
            tol,
            seed,
            out,
        } => {
            let target = read_tensor(&tensor)?;
            let bonds = match ranks.len() {
                1 => vec![ranks[0]; target.order()],
                n if n == target.order() => ranks,
                n => bail!("{n} ranks given for an order-{} tensor", target.order()),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ring = TensorRing::random(target.shape(), &bonds, &mut rng)?;
            let report = ring.fit_als(&target, &AlsOptions { sweeps, tol })?;
            println!("sweep,objective");
            println!("0,{}", report.initial_objective);
            for (k, obj) in report.objectives.iter().enumerate() {
                println!("{},{obj}", k + 1);
            }
            let rel = report.final_objective().sqrt() / target.frobenius_norm().max(f64::MIN_POSITIVE);
            eprintln!("relative error {rel:e}, {} parameters", ring.num_params());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("{}_tr.txt", stem(&tensor)));
                write_tensor(&path, &ring.to_dense())?;
                eprintln!("{}", path.display());
            }
        }
    }
    Ok(())
}
