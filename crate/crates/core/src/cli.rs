//! The `lungnet` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for runtime or data
//! errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::gradcheck::run_suite;
use crate::net::{count_parameters, ArchConfig, SkipMode};
use crate::pipeline::{
    evaluate, generate_report, pretrain_encoder, train_and_save, GroundTruth, NetKind, Predictor,
    TrainOptions, DEFAULT_TAU,
};
use crate::rng::Rng;
use crate::synth::{generate_dataset, load_dataset, read_pgm_gray, read_pgm_mask, Manifest, Split};
use crate::training::{load_weights, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lungnet",
    version,
    about = "Lung segmentation, classification and infection reports"
)]
pub struct Cli {
    /// Seed for every random draw; overrides a `seed` key in config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the numeric kernels.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic phantom dataset.
    Synth {
        /// Samples per class.
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        hw: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classification-only training whose encoder weights seed `train`.
    PretrainEncoder {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_weights: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Train the pipeline or infection network.
    Train {
        #[arg(long)]
        net: NetKind,
        #[arg(long)]
        data: PathBuf,
        /// Encoder weights to start from.
        #[arg(long)]
        init_weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score trained weights on a dataset split.
    Eval {
        #[arg(long)]
        net: NetKind,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// CSV file to write.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Classify one image, estimate infection severity and draw the overlay.
    Infer {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        pipeline_weights: PathBuf,
        #[arg(long)]
        infection_weights: PathBuf,
        #[arg(long, requires = "gt_inf")]
        gt_lung: Option<PathBuf>,
        #[arg(long, requires = "gt_lung")]
        gt_inf: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
    /// Parameter counts of the three skip topologies.
    Params {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Finite-difference check of every operation and a small network.
    Gradcheck,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Architecture and training keys (`key = value`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Samples per forward/backward pass.
    #[arg(long, default_value_t = 8)]
    pub micro_batch: usize,
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return EXIT_USAGE;
        }
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Architecture and training settings from an optional config file with
/// the seed override applied.
fn resolve(config: Option<&Path>, seed: Option<u64>) -> Result<(ArchConfig, TrainConfig)> {
    let mut kv = match config {
        Some(p) => KvConfig::read(p)?,
        None => KvConfig::default(),
    };
    if let Some(s) = seed {
        kv.set("seed", s);
    }
    let train = TrainConfig::from_kv(&mut kv)?;
    let arch = ArchConfig::from_kv(&mut kv)?;
    kv.finish()?;
    Ok((arch, train))
}

fn log_resolved(arch: &ArchConfig, train: &TrainConfig) {
    info!("seed = {}", train.seed);
    info!("architecture:\n{}", arch.to_kv_string());
    info!("training: {train:?}");
}

fn train_settings(
    args: &TrainArgs,
    seed: Option<u64>,
) -> Result<(ArchConfig, TrainConfig, TrainOptions)> {
    let (arch, mut train) = resolve(args.config.as_deref(), seed)?;
    if let Some(e) = args.epochs {
        train.epochs = e;
    }
    log_resolved(&arch, &train);
    let opts = TrainOptions {
        micro_batch: args.micro_batch,
        ..TrainOptions::default()
    };
    Ok((arch, train, opts))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Synth { n, hw, out } => {
            let seed = cli.seed.unwrap_or(TrainConfig::default().seed);
            info!("seed = {seed}");
            let m = generate_dataset(n, seed, hw, &out)?;
            let count = |s| m.split_rows(s).count();
            println!(
                "wrote {} samples to {} (train {}, val {}, test {})",
                m.rows.len(),
                out.display(),
                count(Split::Train),
                count(Split::Val),
                count(Split::Test)
            );
        }
        Command::PretrainEncoder {
            data,
            out_weights,
            train,
        } => {
            let (arch, cfg, opts) = train_settings(&train, cli.seed)?;
            let manifest = Manifest::read(&data)?;
            let dir = tempdir_beside(&out_weights)?;
            let trained = pretrain_encoder(&arch, &manifest, &cfg, &opts, &dir)?;
            std::fs::rename(&trained.weights_path, &out_weights)
                .map_err(|e| Error::io(&out_weights, e))?;
            let curves = out_weights.with_extension("csv");
            std::fs::rename(&trained.curves_path, &curves).map_err(|e| Error::io(&curves, e))?;
            let _ = std::fs::remove_dir(&dir);
            let last = trained.history.val.last();
            println!(
                "encoder weights: {} ({} epochs, val accuracy {:.4})",
                out_weights.display(),
                trained.history.epochs_run(),
                last.map_or(0.0, |e| e.accuracy())
            );
        }
        Command::Train {
            net,
            data,
            init_weights,
            out,
            train,
        } => {
            if net == NetKind::Classifier {
                return Err(Error::InvalidArgument(
                    "use `pretrain-encoder` for classification-only training".into(),
                ));
            }
            let (arch, cfg, opts) = train_settings(&train, cli.seed)?;
            let manifest = Manifest::read(&data)?;
            let init = init_weights.as_deref().map(load_weights).transpose()?;
            let trained = train_and_save(net, &arch, &manifest, &cfg, &opts, init.as_ref(), &out)?;
            std::fs::write(
                out.join(format!("{net}.cfg")),
                trained.graph.config().to_kv_string(),
            )
            .map_err(|e| Error::io(&out, e))?;
            println!("weights: {}", trained.weights_path.display());
            println!("curves: {}", trained.curves_path.display());
            if let Some(v) = trained.history.val.last() {
                println!(
                    "final val: loss {:.4} dice {:.4} accuracy {:.4}",
                    v.loss,
                    v.pixels.dice(),
                    v.accuracy()
                );
            }
        }
        Command::Eval {
            net,
            weights,
            data,
            report,
            split,
            config,
        } => {
            let (arch, cfg) = resolve(config.as_deref(), cli.seed)?;
            log_resolved(&arch, &cfg);
            let split: Split = split.parse()?;
            let manifest = Manifest::read(&data)?;
            let samples = load_dataset(&manifest, split)?;
            let mut graph =
                crate::net::NetworkGraph::build(&net.arch(&arch), &mut Rng::new(cfg.seed))?;
            graph.load_weights(&load_weights(&weights)?)?;
            let e = evaluate(
                &graph,
                net,
                &samples,
                &TrainOptions::default(),
                cfg.loss_mix_lambda,
            )?;
            crate::metrics::write_curves(&[e.curve_row(0, &split.to_string())], &report)?;
            println!(
                "{net} on {split} ({} samples): loss {:.4} dice {:.4} (per-sample mean {:.4}) accuracy {:.4}",
                e.samples,
                e.loss,
                e.pixels.dice(),
                e.mean_dice,
                e.accuracy()
            );
        }
        Command::Infer {
            image,
            pipeline_weights,
            infection_weights,
            gt_lung,
            gt_inf,
            out_dir,
            config,
            tau,
        } => {
            let (arch, cfg) = resolve(config.as_deref(), cli.seed)?;
            log_resolved(&arch, &cfg);
            let predictor = Predictor::load(&arch, &pipeline_weights, &infection_weights, tau)?;
            let gray = read_pgm_gray(&image)?;
            let truth = match (gt_lung, gt_inf) {
                (Some(l), Some(i)) => Some(GroundTruth {
                    lung: read_pgm_mask(l)?,
                    infection: read_pgm_mask(i)?,
                }),
                _ => None,
            };
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let stem = image
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("image");
            let r = generate_report(
                &predictor,
                &gray,
                truth.as_ref(),
                out_dir.join(format!("{stem}_overlay.ppm")),
            )?;
            let json_path = out_dir.join(format!("{stem}_report.json"));
            std::fs::write(&json_path, r.to_json()?).map_err(|e| Error::io(&json_path, e))?;
            println!("label: {} ({})", r.label, r.label_name);
            match (r.perc, &r.severity_error) {
                (Some(p), _) => println!("perc: {p:.2}"),
                (None, Some(msg)) => println!("perc: undefined ({msg})"),
                (None, None) => {}
            }
            if let Some(a) = r.actual_perc {
                println!("actual_perc: {a:.2}");
            }
            if let Some(iou) = r.infection_iou {
                println!("infection_iou: {iou:.4}");
            }
            println!("overlay: {}", r.overlay_path);
            println!("report: {}", json_path.display());
        }
        Command::Params { config } => {
            let (arch, cfg) = resolve(config.as_deref(), cli.seed)?;
            log_resolved(&arch, &cfg);
            for mode in SkipMode::ALL {
                let n = count_parameters(&arch.clone().with_skip_mode(mode))?;
                println!("{mode:<12} {n}");
            }
        }
        Command::Gradcheck => {
            let seed = cli.seed.unwrap_or(TrainConfig::default().seed);
            info!("seed = {seed}");
            let checks = run_suite(seed)?;
            let mut failed = 0;
            for c in &checks {
                let status = if c.passed() { "ok  " } else { "FAIL" };
                println!(
                    "{status} {:<40} {:>6} elems  max rel err {:.3e} (tol {:.0e})",
                    c.result.name, c.result.elements, c.result.max_relative_error, c.tolerance
                );
                failed += usize::from(!c.passed());
            }
            println!("{} checks, {failed} failed", checks.len());
            if failed > 0 {
                return Ok(EXIT_RUNTIME);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Scratch directory next to `target` for outputs that get renamed.
fn tempdir_beside(target: &Path) -> Result<PathBuf> {
    let parent = target
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let dir = parent.join(".lungnet-pretrain");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(dispatch(["lungnet", "frobnicate"]), EXIT_USAGE);
        assert_eq!(dispatch(["lungnet", "params", "--bogus"]), EXIT_USAGE);
        assert_eq!(
            dispatch(["lungnet", "train", "--net", "nope", "--data", "d", "--out", "o"]),
            EXIT_USAGE
        );
    }

    #[test]
    fn missing_files_exit_2() {
        assert_eq!(
            dispatch(["lungnet", "params", "--config", "/nonexistent/x.cfg"]),
            EXIT_RUNTIME
        );
    }

    #[test]
    fn params_runs() {
        assert_eq!(dispatch(["lungnet", "params"]), EXIT_OK);
    }

    #[test]
    fn bad_config_key_is_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.cfg");
        std::fs::write(&p, "levels = 4\nbogus = 1\n").unwrap();
        assert_eq!(
            dispatch(["lungnet", "params", "--config", p.to_str().unwrap()]),
            EXIT_RUNTIME
        );
    }
}
