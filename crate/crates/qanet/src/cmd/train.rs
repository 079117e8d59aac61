//! Network training from corrupted-pair manifests.

use std::path::{Path, PathBuf};

use qanet_core::nn::{ArchConfig, EpochStats, ModelParams, PreparedPair, TrainConfig, Trainer};
use serde::{Deserialize, Serialize};

use super::{image_channels, load_pairs};
use crate::checkpoint;
use crate::error::{Context, Error, Result};
use crate::manifest::{create_dir, write_csv, Manifest};

/// JSON accepted by `--config`; both sections are optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub arch: Option<ArchConfig>,
    pub train: Option<TrainConfig>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).input_err(path.display())?;
        serde_json::from_str(&text).input_err(path.display())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub train: PathBuf,
    pub val: Option<PathBuf>,
    pub arch: ArchConfig,
    pub config: TrainConfig,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct MetricsRow {
    epoch: usize,
    train_mse: f64,
    val_mse: f64,
    val_auc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub history: Vec<EpochStats>,
    pub params: ModelParams<f32>,
}

/// Pairs and their targets; every row must carry `true_q`.
pub fn load_training_set(manifest: &Path, arch: &ArchConfig) -> Result<(Vec<PreparedPair>, Vec<f64>)> {
    let m = Manifest::read(manifest)?;
    if !m.has_column(|r| r.true_q.is_some()) {
        let row = m.rows.iter().find(|r| r.true_q.is_none()).expect("some row lacks it");
        return Err(Error::input(format!("{}: row {}: missing true_q", manifest.display(), row.id)));
    }
    let targets = m.rows.iter().map(|r| r.true_q()).collect::<Result<Vec<_>>>()?;
    Ok((load_pairs(&m, arch)?, targets))
}

pub fn train(opts: &TrainOptions) -> Result<TrainOutput> {
    let mut arch = opts.arch.clone();
    arch.image_channels = image_channels(&Manifest::read(&opts.train)?)?;
    arch.validate().input_err("architecture")?;
    opts.config.validate().input_err("training config")?;
    let train = load_training_set(&opts.train, &arch)?;
    let val = match &opts.val {
        Some(v) => load_training_set(v, &arch)?,
        None => (Vec::new(), Vec::new()),
    };
    fit(&arch, &opts.config, (&train.0, &train.1), (&val.0, &val.1), &opts.out, true)
}

/// Trains on in-memory pairs and writes `model.qant` plus `metrics.csv`
/// (and periodic `epoch_N.qant` files) into `out`.
pub fn fit(
    arch: &ArchConfig,
    config: &TrainConfig,
    train: (&[PreparedPair], &[f64]),
    val: (&[PreparedPair], &[f64]),
    out: &Path,
    verbose: bool,
) -> Result<TrainOutput> {
    create_dir(out)?;
    let mut params = ModelParams::<f32>::init(arch, config.seed).input_err("architecture")?;
    let mut trainer = Trainer::new(config.clone(), &params).input_err("training config")?;
    let history = trainer.fit::<Error>(&mut params, train, val, |s, p| {
        if verbose {
            eprintln!(
                "epoch {:>3}  train_mse {:.5}  val_mse {:.5}  val_auc {:.4}",
                s.epoch, s.train_mse, s.val_mse, s.val_auc
            );
        }
        if config.checkpoint_every > 0 && s.epoch % config.checkpoint_every == 0 {
            checkpoint::save(&out.join(format!("epoch_{}.qant", s.epoch)), p)?;
        }
        Ok(())
    })?;
    let rows: Vec<MetricsRow> = history
        .iter()
        .map(|s| MetricsRow {
            epoch: s.epoch,
            train_mse: s.train_mse,
            val_mse: s.val_mse,
            val_auc: s.val_auc,
        })
        .collect();
    let metrics = out.join("metrics.csv");
    write_csv(&metrics, &rows)?;
    let ckpt = out.join("model.qant");
    checkpoint::save(&ckpt, &params)?;
    Ok(TrainOutput {
        checkpoint: ckpt,
        metrics,
        history,
        params,
    })
}
