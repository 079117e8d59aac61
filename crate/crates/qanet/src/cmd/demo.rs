//! The whole pipeline at desk scale: synthesize phantoms, corrupt them,
//! train, predict on the held-out part and evaluate. Optionally repeats the
//! training for every architecture/encoding pair over several seeds and
//! tabulates the validation AUC.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qanet_core::corrupt::Domain;
use qanet_core::nn::{ArchConfig, InputEncoding, LrSchedule, TrainConfig, Variant};
use qanet_core::phantom::PhantomConfig;
use qanet_core::rng::derive_seed;
use qanet_core::Measure;
use serde::Serialize;

use super::corrupt::{corrupt_dataset, CorruptOptions};
use super::evaluate::{self, EvalReport};
use super::predict::{self, predict_prepared};
use super::synth::{synth, SynthOptions};
use super::train::{fit, load_training_set};
use super::image_channels;
use crate::error::{Context, Result};
use crate::manifest::{create_dir, write_csv, Manifest};

#[derive(Debug, Clone)]
pub struct DemoOptions {
    pub out: PathBuf,
    pub phantom: PhantomConfig,
    pub count: usize,
    pub corruptions: usize,
    pub split: f64,
    pub measure: Measure,
    pub domain: Domain,
    pub seed: u64,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    /// Seeds per ablation configuration; 0 skips the ablation.
    pub ablation_seeds: usize,
    pub verbose: bool,
}

impl DemoOptions {
    /// 2000 phantoms of 64x64, three corruptions each, RibCage with
    /// trinary input.
    pub fn desk(out: PathBuf) -> Self {
        Self {
            out,
            phantom: PhantomConfig::default(),
            count: 2000,
            corruptions: 3,
            split: 0.7,
            measure: Measure::Seg,
            domain: Domain::Cells,
            seed: 0,
            arch: ArchConfig::desk(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch),
            // a constant rate leaves the last epoch wherever the val loss
            // happened to oscillate; 20 cosine-decayed epochs settle it
            train: TrainConfig { epochs: 20, lr_schedule: LrSchedule::Cosine, ..TrainConfig::default() },
            ablation_seeds: 0,
            verbose: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub variant: String,
    pub encoding: String,
    pub seed: u64,
    pub val_mse: f64,
    pub val_mae: f64,
    pub hit_rate_0_1: f64,
    pub val_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub encoding: String,
    pub runs: usize,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub mean_mae: f64,
}

#[derive(Debug, Clone)]
pub struct DemoReport {
    pub eval: EvalReport,
    pub n_train: usize,
    pub n_val: usize,
    pub runs: Vec<RunRow>,
    pub ablation: Vec<AblationRow>,
    /// Wall time from synthesis to the held-out evaluation, in seconds.
    pub pipeline_seconds: f64,
}

impl DemoReport {
    pub fn mean_auc(&self, variant: Variant, encoding: InputEncoding) -> Option<f64> {
        self.ablation
            .iter()
            .find(|r| r.variant == variant.name() && r.encoding == encoding.name())
            .map(|r| r.mean_auc)
    }
}

fn log(verbose: bool, msg: impl AsRef<str>) {
    if verbose {
        eprintln!("{}", msg.as_ref());
    }
}

fn run_row(arch: &ArchConfig, seed: u64, val_q: &[f64], pred: &[f64], ids: &[String]) -> Result<RunRow> {
    let r = evaluate::report(val_q, pred, ids, &qanet_core::measures::default_tolerances())?;
    Ok(RunRow {
        variant: arch.variant.name().into(),
        encoding: arch.input_encoding.name().into(),
        seed,
        val_mse: r.mse,
        val_mae: r.mae,
        hit_rate_0_1: r.hit_rate_at(0.1),
        val_auc: r.curve.auc,
    })
}

pub fn demo(opts: &DemoOptions) -> Result<DemoReport> {
    let start = Instant::now();
    let v = opts.verbose;
    let out = &opts.out;
    create_dir(out)?;

    log(v, format!("synthesizing {} phantoms", opts.count));
    let data = synth(&SynthOptions {
        phantom: opts.phantom.with_seed(opts.seed),
        count: opts.count,
        split: opts.split,
        out: out.join("data"),
    })?;
    let pairs_for = |manifest: &Path, stream: u64, dir: &str| {
        corrupt_dataset(&CorruptOptions {
            manifest: manifest.to_path_buf(),
            count_per_image: opts.corruptions,
            measure: opts.measure,
            domain: opts.domain,
            seed: derive_seed(opts.seed, stream),
            out: out.join(dir),
        })
    };
    log(v, "corrupting ground truth");
    let train_pairs = pairs_for(&data.train, 1, "train_pairs")?;
    let val_pairs = pairs_for(&data.val, 2, "val_pairs")?;

    let mut arch = opts.arch.clone();
    arch.image_channels = image_channels(&Manifest::read(&train_pairs.manifest)?)?;
    arch.validate().input_err("architecture")?;
    let train = load_training_set(&train_pairs.manifest, &arch)?;
    let val = load_training_set(&val_pairs.manifest, &arch)?;
    log(v, format!("training {} / {} on {} pairs, validating on {}", arch.variant, arch.input_encoding, train.0.len(), val.0.len()));
    let main = fit(&arch, &opts.train, (&train.0, &train.1), (&val.0, &val.1), &out.join("model"), v)?;

    // held-out evaluation through the files a user would pass around
    let preds = predict::predict(&main.checkpoint, &val_pairs.manifest)?;
    let pred_file = predict::write(&preds, &out.join("predictions"))?;
    let tolerances = qanet_core::measures::default_tolerances();
    let eval = evaluate::evaluate(&pred_file, &val_pairs.manifest, &tolerances, opts.measure)?;
    evaluate::write(&eval, &out.join("eval"))?;
    let pipeline_seconds = start.elapsed().as_secs_f64();
    log(
        v,
        format!(
            "held-out MAE {:.4}  hit rate at 0.1 {:.4}  AUC {:.4}",
            eval.mae,
            eval.hit_rate_at(0.1),
            eval.curve.auc
        ),
    );

    let ids: Vec<String> = val_pairs.rows.iter().map(|r| r.id.clone()).collect();
    let main_pred: Vec<f64> = preds.iter().map(|p| p.predicted_q).collect();
    let mut runs = Vec::new();
    if opts.ablation_seeds > 0 {
        for variant in Variant::ALL {
            for encoding in [InputEncoding::TrinaryOnehot3ch, InputEncoding::Binary1ch] {
                let cfg_arch = ArchConfig {
                    variant,
                    input_encoding: encoding,
                    ..arch.clone()
                };
                for s in 0..opts.ablation_seeds as u64 {
                    let tcfg = TrainConfig {
                        seed: opts.train.seed + s,
                        ..opts.train.clone()
                    };
                    let row = if s == 0 && cfg_arch == arch {
                        run_row(&arch, tcfg.seed, &val.1, &main_pred, &ids)?
                    } else {
                        log(v, format!("ablation: {variant} / {encoding}, seed {}", tcfg.seed));
                        let dir = out.join("ablation").join(format!("{variant}_{encoding}_s{}", tcfg.seed));
                        let res = fit(&cfg_arch, &tcfg, (&train.0, &train.1), (&val.0, &val.1), &dir, false)?;
                        let pred = predict_prepared(&res.params, &val.0)?;
                        run_row(&cfg_arch, tcfg.seed, &val.1, &pred, &ids)?
                    };
                    log(v, format!("  val AUC {:.4}  MAE {:.4}", row.val_auc, row.val_mae));
                    runs.push(row);
                }
            }
        }
    }
    let ablation = summarize(&runs);
    if !runs.is_empty() {
        write_csv(&out.join("ablation_runs.csv"), &runs)?;
        write_csv(&out.join("ablation.csv"), &ablation)?;
    }
    Ok(DemoReport {
        eval,
        n_train: train.0.len(),
        n_val: val.0.len(),
        runs,
        ablation,
        pipeline_seconds,
    })
}

/// Mean and population std of the validation AUC per configuration, in
/// first-seen order.
pub fn summarize(runs: &[RunRow]) -> Vec<AblationRow> {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in runs {
        let k = (r.variant.as_str(), r.encoding.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(variant, encoding)| {
            let sel: Vec<&RunRow> = runs.iter().filter(|r| r.variant == variant && r.encoding == encoding).collect();
            let n = sel.len() as f64;
            let mean = sel.iter().map(|r| r.val_auc).sum::<f64>() / n;
            let var = sel.iter().map(|r| (r.val_auc - mean).powi(2)).sum::<f64>() / n;
            AblationRow {
                variant: variant.into(),
                encoding: encoding.into(),
                runs: sel.len(),
                mean_auc: mean,
                std_auc: var.sqrt(),
                mean_mae: sel.iter().map(|r| r.val_mae).sum::<f64>() / n,
            }
        })
        .collect()
}

/// Plain-text table plus the two orderings the comparison is about.
pub fn format_ablation(report: &DemoReport) -> String {
    let mut s = format!("{:<10} {:<8} {:>4} {:>9} {:>8} {:>9}\n", "variant", "encoding", "runs", "mean_auc", "std_auc", "mean_mae");
    for r in &report.ablation {
        s += &format!(
            "{:<10} {:<8} {:>4} {:>9.4} {:>8.4} {:>9.4}\n",
            r.variant, r.encoding, r.runs, r.mean_auc, r.std_auc, r.mean_mae
        );
    }
    let auc = |v, e| report.mean_auc(v, e).unwrap_or(f64::NAN);
    for e in [InputEncoding::TrinaryOnehot3ch, InputEncoding::Binary1ch] {
        let (r, n, si) = (auc(Variant::Ribcage, e), auc(Variant::Naive, e), auc(Variant::Siamese, e));
        s += &format!("{e}: ribcage >= naive >= siamese: {}\n", yes_no(r >= n && n >= si));
    }
    let tri_wins = Variant::ALL
        .iter()
        .filter(|&&v| auc(v, InputEncoding::TrinaryOnehot3ch) >= auc(v, InputEncoding::Binary1ch))
        .count();
    s += &format!("trinary >= binary: {tri_wins} of {} architectures\n", Variant::ALL.len());
    s
}

fn yes_no(b: bool) -> &'static str {
    if b { "yes" } else { "no" }
}
