//! Mini-batch training over in-memory pairs.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::encode::{make_batch, PreparedPair};
use super::network::{backward, forward, mse_loss, predict, Mode};
use super::optim::{Optimizer, OptimizerKind};
use super::params::ModelParams;
use super::{NetError, Real};
use crate::measures::{default_tolerances, hit_rate_curve, mse};
use crate::rng::{self, STREAM_SHUFFLE};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub bn_momentum: f64,
    pub seed: u64,
    /// Write a checkpoint every this many epochs; 0 keeps only the final one.
    pub checkpoint_every: usize,
    pub lr_schedule: LrSchedule,
}

/// Per-epoch learning-rate multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine from the base rate at the first epoch towards zero after the last.
    Cosine,
}

impl LrSchedule {
    /// Multiplier for zero-based `epoch` out of `epochs`.
    pub fn factor(self, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => 0.5 * (1.0 + libm::cos(core::f64::consts::PI * epoch as f64 / epochs.max(1) as f64)),
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 12,
            bn_momentum: 0.9,
            seed: 0,
            checkpoint_every: 0,
            lr_schedule: LrSchedule::Constant,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(NetError::Train(format!("learning_rate {} is invalid", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(NetError::Train("batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(NetError::Train("bn_momentum must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub train_mse: f64,
    /// NaN when there is no validation data.
    pub val_mse: f64,
    pub val_auc: f64,
}

/// Deterministic Fisher-Yates permutation for one epoch.
pub fn epoch_order(seed: u64, epoch: usize, len: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = rng::stream(rng::derive_seed(seed, epoch as u64), STREAM_SHUFFLE);
    for i in (1..len).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// Clamped eval-mode predictions, in input order.
pub fn predict_pairs<T: Real>(
    params: &ModelParams<T>,
    pairs: &[&PreparedPair],
    batch_size: usize,
) -> Result<Vec<f64>, NetError> {
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(batch_size.max(1)) {
        let batch = make_batch::<T>(params.arch(), chunk);
        out.extend(predict(params, &batch)?.into_iter().map(|v| v.to_f64().expect("finite")));
    }
    Ok(out)
}

pub struct Trainer<T> {
    config: TrainConfig,
    optimizer: Optimizer<T>,
    epoch: usize,
}

impl<T: Real> Trainer<T> {
    pub fn new(config: TrainConfig, params: &ModelParams<T>) -> Result<Self, NetError> {
        config.validate()?;
        Ok(Self {
            optimizer: Optimizer::new(config.optimizer, config.learning_rate, params),
            config,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// One optimisation step on a batch; returns the batch loss.
    pub fn step(&mut self, params: &mut ModelParams<T>, pairs: &[&PreparedPair], targets: &[f64]) -> Result<f64, NetError> {
        let batch = make_batch::<T>(params.arch(), pairs);
        let (out, cache) = forward(params, &batch, Mode::Train)?;
        let target: Vec<T> = targets.iter().map(|&q| T::from_f64(q).expect("finite")).collect();
        let (loss, d_out) = mse_loss(&out, &target);
        let grads = backward(params, &cache, &d_out)?;
        self.optimizer.step(params, &grads);
        cache.update_running_stats(params, T::from_f64(self.config.bn_momentum).expect("finite"))?;
        Ok(loss.to_f64().expect("finite"))
    }

    /// One shuffled pass over the training pairs; returns the mean
    /// per-sample train-mode squared error.
    pub fn train_epoch(&mut self, params: &mut ModelParams<T>, pairs: &[PreparedPair], targets: &[f64]) -> Result<f64, NetError> {
        if pairs.len() != targets.len() {
            return Err(NetError::Train(format!("{} pairs but {} targets", pairs.len(), targets.len())));
        }
        if pairs.is_empty() {
            return Err(NetError::Train("no training pairs".into()));
        }
        let factor = self.config.lr_schedule.factor(self.epoch, self.config.epochs);
        self.optimizer.set_learning_rate(self.config.learning_rate * factor);
        self.epoch += 1;
        let order = epoch_order(self.config.seed, self.epoch, pairs.len());
        let mut total = 0.0;
        for idx in order.chunks(self.config.batch_size) {
            let batch: Vec<&PreparedPair> = idx.iter().map(|&i| &pairs[i]).collect();
            let q: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
            total += self.step(params, &batch, &q)? * idx.len() as f64;
        }
        Ok(total / pairs.len() as f64)
    }

    /// Trains for `config.epochs` epochs, calling `on_epoch` after each one.
    pub fn fit<E: From<NetError>>(
        &mut self,
        params: &mut ModelParams<T>,
        train: (&[PreparedPair], &[f64]),
        val: (&[PreparedPair], &[f64]),
        mut on_epoch: impl FnMut(&EpochStats, &ModelParams<T>) -> Result<(), E>,
    ) -> Result<Vec<EpochStats>, E> {
        let mut history = Vec::new();
        let val_refs: Vec<&PreparedPair> = val.0.iter().collect();
        for _ in 0..self.config.epochs {
            let train_mse = self.train_epoch(params, train.0, train.1)?;
            let (val_mse, val_auc) = if val_refs.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let pred = predict_pairs(params, &val_refs, self.config.batch_size.max(64))?;
                let curve = hit_rate_curve(&pred, val.1, &default_tolerances())
                    .map_err(|e| NetError::Train(format!("{e}")))?;
                (mse(&pred, val.1).map_err(|e| NetError::Train(format!("{e}")))?, curve.auc)
            };
            let stats = EpochStats {
                epoch: self.epoch,
                train_mse,
                val_mse,
                val_auc,
            };
            on_epoch(&stats, params)?;
            history.push(stats);
        }
        Ok(history)
    }
}
