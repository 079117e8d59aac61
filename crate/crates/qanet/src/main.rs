use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qanet::cmd::{corrupt, cross_eval, demo, evaluate, predict, score, synth, train};
use qanet::error::{Context, Error, Result};
use qanet_core::corrupt::Domain;
use qanet_core::nn::{ArchConfig, InputEncoding, LrSchedule, OptimizerKind, TrainConfig, Variant};
use qanet_core::phantom::PhantomConfig;
use qanet_core::Measure;
use serde::Deserialize;

/// Estimate and evaluate instance-segmentation quality without ground truth.
///
/// Set QANET_THREADS to a positive number to process image pairs in
/// parallel; unset or 0 runs single-threaded. Outputs are identical either way.
#[derive(Parser)]
#[command(name = "qanet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score evaluated segmentations against ground truth (eval_seg, gt_seg columns).
    Score {
        manifest: PathBuf,
        #[arg(long, default_value = "seg")]
        measure: Measure,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Make corrupted segmentations with exact scores from a ground-truth manifest.
    Corrupt {
        manifest: PathBuf,
        /// Corruptions per ground-truth image.
        #[arg(long, default_value_t = 3)]
        count: usize,
        #[arg(long, default_value = "seg")]
        measure: Measure,
        #[arg(long, default_value = "cells")]
        domain: Domain,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate phantom images with ground truth and train/val manifests.
    Synth {
        /// Phantom config JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 0.7)]
        split: f64,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train a quality-regression network on a corrupted-pair manifest.
    Train {
        train: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        /// JSON with optional "arch" and "train" sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Predict quality for each row; ground truth columns are ignored.
    Predict {
        checkpoint: PathBuf,
        manifest: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Compare predictions with true quality: hit rate, AUC, scatter data.
    Evaluate {
        predictions: PathBuf,
        truth: PathBuf,
        /// Tolerance grid resolution: steps+1 points from 0 to 1.
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Used for truth rows that have segmentations but no true_q.
        #[arg(long, default_value = "seg")]
        measure: Measure,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Score two segmentations of the same images against each other.
    CrossEval {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "seg")]
        measure: Measure,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run synth, corrupt, train, predict and evaluate end to end.
    Demo {
        /// JSON with optional "phantom", "arch" and "train" sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        corruptions: usize,
        #[arg(long, default_value = "seg")]
        measure: Measure,
        #[arg(long, default_value = "cells")]
        domain: Domain,
        #[command(flatten)]
        net: NetArgs,
        /// Also train every architecture/encoding pair with this many seeds.
        #[arg(long, default_value_t = 0)]
        ablation_seeds: usize,
        #[arg(long)]
        quiet: bool,
        #[arg(long, default_value = "qanet-demo")]
        out: PathBuf,
    },
}

/// Network and optimizer overrides shared by `train` and `demo`.
#[derive(Args)]
struct NetArgs {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    encoding: Option<InputEncoding>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_parser = parse_optimizer)]
    optimizer: Option<OptimizerKind>,
    /// constant or cosine
    #[arg(long, value_parser = parse_schedule)]
    lr_schedule: Option<LrSchedule>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_schedule(s: &str) -> std::result::Result<LrSchedule, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown schedule {s:?} (expected constant or cosine)"))
}

fn parse_optimizer(s: &str) -> std::result::Result<OptimizerKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown optimizer {s:?} (expected adam or sgd_momentum)"))
}

impl NetArgs {
    fn apply(&self, arch: &mut ArchConfig, t: &mut TrainConfig) {
        if let Some(v) = self.variant {
            arch.variant = v;
        }
        if let Some(e) = self.encoding {
            arch.input_encoding = e;
        }
        if let Some(n) = self.epochs {
            t.epochs = n;
        }
        if let Some(lr) = self.lr {
            t.learning_rate = lr;
        }
        if let Some(b) = self.batch_size {
            t.batch_size = b;
        }
        if let Some(o) = self.optimizer {
            t.optimizer = o;
        }
        if let Some(l) = self.lr_schedule {
            t.lr_schedule = l;
        }
        if let Some(s) = self.seed {
            t.seed = s;
        }
    }
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DemoConfig {
    phantom: Option<PhantomConfig>,
    arch: Option<ArchConfig>,
    train: Option<TrainConfig>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).input_err(path.display())?;
    serde_json::from_str(&text).input_err(path.display())
}

fn default_arch() -> ArchConfig {
    ArchConfig::desk(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch)
}

fn run(cli: Cli) -> Result<()> {
    // fail early on a malformed thread setting
    qanet::par::threads()?;
    match cli.command {
        Command::Score { manifest, measure, out } => {
            let r = score::score(&manifest, measure)?;
            let path = score::write(&r, &out)?;
            println!("mean {} {:.6} over {} pairs ({})", measure.name().to_uppercase(), r.mean, r.rows.len(), path.display());
        }
        Command::Corrupt { manifest, count, measure, domain, seed, out } => {
            let r = corrupt::corrupt_dataset(&corrupt::CorruptOptions {
                manifest,
                count_per_image: count,
                measure,
                domain,
                seed,
                out,
            })?;
            for (id, w) in &r.warnings {
                eprintln!("warning: {id}: {w}");
            }
            println!("{} corrupted pairs ({})", r.rows.len(), r.manifest.display());
        }
        Command::Synth { config, count, split, seed, out } => {
            let mut phantom: PhantomConfig = match config {
                Some(p) => read_json(&p)?,
                None => PhantomConfig::default(),
            };
            if let Some(s) = seed {
                phantom.seed = s;
            }
            let r = synth::synth(&synth::SynthOptions { phantom, count, split, out })?;
            println!("{} train, {} val ({}, {})", r.n_train, r.n_val, r.train.display(), r.val.display());
        }
        Command::Train { train, val, config, net, out } => {
            let file = match config {
                Some(p) => train::ConfigFile::read(&p)?,
                None => train::ConfigFile::default(),
            };
            let mut arch = file.arch.unwrap_or_else(default_arch);
            let mut tcfg = file.train.unwrap_or_default();
            net.apply(&mut arch, &mut tcfg);
            let r = train::train(&train::TrainOptions { train, val, arch, config: tcfg, out })?;
            if let Some(last) = r.history.last() {
                println!(
                    "epoch {}: train_mse {:.5} val_mse {:.5} val_auc {:.4} ({})",
                    last.epoch,
                    last.train_mse,
                    last.val_mse,
                    last.val_auc,
                    r.checkpoint.display()
                );
            }
        }
        Command::Predict { checkpoint, manifest, out } => {
            let p = predict::predict(&checkpoint, &manifest)?;
            let path = predict::write(&p, &out)?;
            println!("{} predictions ({})", p.len(), path.display());
        }
        Command::Evaluate { predictions, truth, steps, measure, out } => {
            if steps == 0 {
                return Err(Error::input("steps must be at least 1"));
            }
            let grid = evaluate::tolerance_grid(steps);
            let r = evaluate::evaluate(&predictions, &truth, &grid, measure)?;
            evaluate::write(&r, &out)?;
            println!("AUC {:.6}", r.curve.auc);
        }
        Command::CrossEval { a, b, measure, out } => {
            let r = cross_eval::cross_eval(&a, &b, measure)?;
            cross_eval::write(&r, &out)?;
            println!("mean {} with a as GT {:.6}, with b as GT {:.6}", measure.name().to_uppercase(), r.mean_a_as_gt, r.mean_b_as_gt);
        }
        Command::Demo { config, count, corruptions, measure, domain, net, ablation_seeds, quiet, out } => {
            let file: DemoConfig = match config {
                Some(p) => read_json(&p)?,
                None => DemoConfig::default(),
            };
            let mut opts = demo::DemoOptions::desk(out);
            // config sections replace the desk defaults only when present
            if let Some(p) = file.phantom {
                opts.phantom = p;
            }
            if let Some(a) = file.arch {
                opts.arch = a;
            }
            if let Some(t) = file.train {
                opts.train = t;
            }
            net.apply(&mut opts.arch, &mut opts.train);
            if let Some(s) = net.seed {
                opts.seed = s;
            }
            opts.count = count;
            opts.corruptions = corruptions;
            opts.measure = measure;
            opts.domain = domain;
            opts.ablation_seeds = ablation_seeds;
            opts.verbose = !quiet;
            let r = demo::demo(&opts)?;
            println!(
                "held-out pairs {}  MAE {:.4}  hit rate at 0.1 {:.4}  AUC {:.4}",
                r.n_val,
                r.eval.mae,
                r.eval.hit_rate_at(0.1),
                r.eval.curve.auc
            );
            println!("pipeline time {:.1} s", r.pipeline_seconds);
            if !r.ablation.is_empty() {
                print!("{}", demo::format_ablation(&r));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => {
            eprintln!("error: internal failure (see panic message above)");
            ExitCode::from(1)
        }
    }
}
