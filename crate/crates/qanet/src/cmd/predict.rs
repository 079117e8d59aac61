//! Quality estimates from a trained checkpoint. Only the image and the
//! evaluated segmentation of each row are read.

use std::path::{Path, PathBuf};

use qanet_core::nn::train::predict_pairs;
use qanet_core::nn::{ModelParams, PreparedPair};
use serde::Serialize;

use super::load_pairs;
use crate::checkpoint;
use crate::error::{Context, Result};
use crate::manifest::{create_dir, write_csv, Manifest};

const BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub id: String,
    pub predicted_q: f64,
}

pub fn predict_prepared(params: &ModelParams<f32>, pairs: &[PreparedPair]) -> Result<Vec<f64>> {
    let refs: Vec<&PreparedPair> = pairs.iter().collect();
    predict_pairs(params, &refs, BATCH).input_err("prediction")
}

pub fn predict(checkpoint: &Path, manifest: &Path) -> Result<Vec<Prediction>> {
    let params = checkpoint::load(checkpoint)?;
    let m = Manifest::read(manifest)?;
    let pairs = load_pairs(&m, params.arch())?;
    let q = predict_prepared(&params, &pairs)?;
    Ok(m.rows
        .iter()
        .zip(q)
        .map(|(r, predicted_q)| Prediction {
            id: r.id.clone(),
            predicted_q,
        })
        .collect())
}

pub fn write(preds: &[Prediction], out: &Path) -> Result<PathBuf> {
    create_dir(out)?;
    let path = out.join("predictions.csv");
    write_csv(&path, preds)?;
    Ok(path)
}
