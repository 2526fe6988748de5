//! `lesionseg` command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::{prepare_output_dir, RunConfig};
use super::dataset::Dataset;
use super::predict::{evaluate, predict_files};
use super::synth::{write_synthetic, SYNTH_HEIGHT, SYNTH_WIDTH};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::network::{load_weights, save_weights, Network};
use crate::tensor::gradcheck::{check_network_subset, check_primitive, Primitive, DEFAULT_STEP};
use crate::tensor::Shape;
use crate::training::{history_csv, train_ensemble, train_with};

/// Exit status for usage errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for failures while running a command.
pub const EXIT_FAILURE: i32 = 1;

/// Relative error bound for `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(
    name = "lesionseg",
    version,
    about = "Skin lesion segmentation with a convolutional-deconvolutional network"
)]
pub struct Cli {
    /// Run configuration file of key=value lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", short = 's', global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic image/mask corpus with a manifest and run config.
    Synth {
        /// Number of image/mask pairs.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "synthetic")]
        out: PathBuf,
        #[arg(long, default_value_t = SYNTH_HEIGHT)]
        height: usize,
        #[arg(long, default_value_t = SYNTH_WIDTH)]
        width: usize,
    },
    /// Train one network on the manifest.
    Train {
        /// Manifest of `image.ppm,mask.pgm` lines [default: from the config].
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Overrides the configured epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Weight file to write [default: <weights_dir>/model.cdnn].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a bagged ensemble into <weights_dir>/member-K.cdnn.
    TrainEnsemble {
        /// Manifest of `image.ppm,mask.pgm` lines [default: from the config].
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Overrides the configured epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Overrides the configured ensemble size.
        #[arg(long)]
        members: Option<usize>,
    },
    /// Segment images with one or more weight files.
    Predict {
        /// Weight files [default: member-*.cdnn in weights_dir, else model.cdnn].
        #[arg(long, num_args = 1..)]
        weights: Vec<PathBuf>,
        /// Directory for the masks [default: output_dir].
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Manifest of `image.ppm,mask.pgm` lines [default: from the config].
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Images to segment [default: the manifest's images].
        images: Vec<PathBuf>,
    },
    /// Score predicted masks against the manifest's ground truth.
    Evaluate {
        /// Directory of predicted masks [default: output_dir].
        #[arg(long)]
        pred_dir: Option<PathBuf>,
        /// Manifest of `image.ppm,mask.pgm` lines [default: from the config].
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Finite-difference checks of every primitive and a network subset.
    Gradcheck {
        /// Parameters sampled in the network check.
        #[arg(long, default_value_t = 40)]
        samples: usize,
    },
    /// Print the layer table, output extents and parameter count.
    InspectNet {
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        /// Inspect a saved weight file instead of a fresh network.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn config_for(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for s in &cli.set {
        cfg.apply(s)?;
    }
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn load_dataset(cfg: &mut RunConfig, manifest: Option<PathBuf>) -> Result<Dataset> {
    if let Some(m) = manifest {
        cfg.manifest = Some(m);
    }
    let dataset = Dataset::load(cfg.require_manifest()?)?;
    dataset.check_files()?;
    if dataset.records.is_empty() {
        return Err(Error::Config("manifest lists no images".into()));
    }
    Ok(dataset)
}

fn default_weights(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut members: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            name.starts_with("member-") && name.ends_with(".cdnn")
        })
        .collect();
    members.sort();
    if members.is_empty() {
        members.push(dir.join("model.cdnn"));
    }
    Ok(members)
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let mut cfg = config_for(&cli)?;
    match cli.command {
        Command::Synth {
            n,
            out: dir,
            height,
            width,
        } => {
            if n == 0 {
                return Err(Error::Config("--n must be at least 1".into()));
            }
            let manifest = write_synthetic(&dir, n, height, width, cfg.train.seed)?;
            let mut run = RunConfig {
                manifest: Some("manifest.txt".into()),
                ..cfg.clone()
            };
            run.input_height = height;
            run.input_width = width;
            run.validate()?;
            write_atomic(&dir.join("run.cfg"), run.to_text().as_bytes())?;
            writeln!(out, "wrote {n} pairs; manifest {}", manifest.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Train {
            manifest,
            epochs,
            out: target,
        } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            let dataset = load_dataset(&mut cfg, manifest)?;
            prepare_output_dir(&cfg.weights_dir)?;
            let target = target.unwrap_or_else(|| cfg.weights_dir.join("model.cdnn"));
            let samples = dataset.load_samples(cfg.input_height, cfg.input_width)?;
            writeln!(out, "epoch,mean_loss,mean_train_jaccard").map_err(io_err)?;
            let outcome = train_with(&cfg.train, &samples, |s| {
                let _ = writeln!(out, "{},{:.6},{:.6}", s.epoch, s.mean_loss, s.mean_train_jaccard);
            })?;
            save_weights(&outcome.network, &target)?;
            write_atomic(
                &target.with_extension("history.csv"),
                history_csv(&outcome.history).as_bytes(),
            )?;
            writeln!(err, "saved {}", target.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::TrainEnsemble {
            manifest,
            epochs,
            members,
        } => {
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(m) = members {
                cfg.train.ensemble_size = m;
            }
            cfg.validate()?;
            let dataset = load_dataset(&mut cfg, manifest)?;
            prepare_output_dir(&cfg.weights_dir)?;
            let samples = dataset.load_samples(cfg.input_height, cfg.input_width)?;
            writeln!(out, "member,epoch,mean_loss,mean_train_jaccard").map_err(io_err)?;
            let outcomes = train_ensemble(&cfg.train, &samples, |k, s| {
                let _ = writeln!(out, "{k},{},{:.6},{:.6}", s.epoch, s.mean_loss, s.mean_train_jaccard);
            })?;
            for (k, o) in outcomes.iter().enumerate() {
                let path = cfg.weights_dir.join(format!("member-{k}.cdnn"));
                save_weights(&o.network, &path)?;
                write_atomic(&path.with_extension("history.csv"), history_csv(&o.history).as_bytes())?;
            }
            writeln!(err, "saved {} members to {}", outcomes.len(), cfg.weights_dir.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Predict {
            weights,
            out_dir,
            manifest,
            images,
        } => {
            cfg.validate()?;
            let images = if images.is_empty() {
                load_dataset(&mut cfg, manifest)?
                    .records
                    .into_iter()
                    .map(|r| r.image)
                    .collect()
            } else {
                images
            };
            let weights = if weights.is_empty() {
                default_weights(&cfg.weights_dir)?
            } else {
                weights
            };
            let networks = weights.iter().map(load_weights).collect::<Result<Vec<Network>>>()?;
            let out_dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            prepare_output_dir(&out_dir)?;
            let summary = predict_files(
                &networks,
                &images,
                &out_dir,
                cfg.input_height,
                cfg.input_width,
                cfg.write_probability_maps,
            );
            for p in &summary.written {
                writeln!(out, "{}", p.display()).map_err(io_err)?;
            }
            for (p, e) in &summary.failures {
                writeln!(err, "failed: {}: {e}", p.display()).map_err(io_err)?;
            }
            Ok(if summary.failures.is_empty() { 0 } else { EXIT_FAILURE })
        }
        Command::Evaluate {
            pred_dir,
            manifest,
            report,
        } => {
            let dataset = load_dataset(&mut cfg, manifest)?;
            let pred_dir = pred_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let r = evaluate(&pred_dir, &dataset)?;
            let text = r.to_csv();
            write!(out, "{text}").map_err(io_err)?;
            if let Some(path) = report {
                write_atomic(&path, text.as_bytes())?;
            }
            Ok(0)
        }
        Command::Gradcheck { samples } => {
            let shapes = gradcheck_shapes();
            let mut ok = true;
            for prim in Primitive::all() {
                let mut worst = 0.0f64;
                for (i, &s) in shapes.iter().enumerate() {
                    worst = worst.max(check_primitive(
                        prim,
                        s,
                        cfg.train.seed.wrapping_add(i as u64),
                        DEFAULT_STEP,
                    )?);
                }
                ok &= worst < GRADCHECK_TOLERANCE;
                writeln!(out, "{:<24} {worst:.3e}", prim.name()).map_err(io_err)?;
            }
            let net = check_network_subset(cfg.train.seed, samples, Shape::new(2, 7, 32, 32), DEFAULT_STEP)?;
            ok &= net < GRADCHECK_TOLERANCE;
            writeln!(out, "{:<24} {net:.3e}", "network-subset").map_err(io_err)?;
            writeln!(
                out,
                "{}",
                if ok {
                    "all checks passed"
                } else {
                    "gradient check FAILED"
                }
            )
            .map_err(io_err)?;
            Ok(if ok { 0 } else { EXIT_FAILURE })
        }
        Command::InspectNet { height, width, weights } => {
            let h = height.unwrap_or(cfg.input_height);
            let w = width.unwrap_or(cfg.input_width);
            let net = match weights {
                Some(p) => load_weights(&p)?,
                None => Network::cdnn(cfg.train.seed),
            };
            let trace = net.layer_shapes(Shape::new(1, net.input_channels(), h, w))?;
            writeln!(
                out,
                "{:<10} {:<8} {:>6} {:>6} {:>16} {:>10}",
                "layer", "kind", "filter", "out", "output", "params"
            )
            .map_err(io_err)?;
            for ((spec, t), p) in net.layers().iter().zip(&trace).zip(net.layer_params()) {
                let count = p.as_ref().map_or(0, |p| p.count());
                writeln!(
                    out,
                    "{:<10} {:<8} {:>6} {:>6} {:>16} {:>10}",
                    spec.name,
                    spec.kind.to_string(),
                    format!("{}x{}", spec.filter.0, spec.filter.1),
                    spec.out_features,
                    format!("{}x{}x{}", t.shape.c, t.shape.h, t.shape.w),
                    count
                )
                .map_err(io_err)?;
            }
            writeln!(out, "total parameters: {}", net.param_count()).map_err(io_err)?;
            Ok(0)
        }
    }
}

/// Five shapes with even extents so that pooling applies to each.
pub fn gradcheck_shapes() -> [Shape; 5] {
    [
        Shape::new(2, 3, 6, 6),
        Shape::new(1, 2, 4, 8),
        Shape::new(3, 1, 8, 4),
        Shape::new(2, 4, 4, 4),
        Shape::new(1, 3, 6, 10),
    ]
}
