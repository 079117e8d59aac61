//! Exact scores of evaluated segmentations against ground truth.

use std::path::{Path, PathBuf};

use qanet_core::Measure;
use serde::Serialize;

use super::score_maps;
use crate::error::Result;
use crate::imageio::read_labels;
use crate::manifest::{create_dir, write_csv, Manifest};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub id: String,
    /// Ground-truth objects.
    pub k: usize,
    /// Evaluated objects.
    pub k_prime: usize,
    pub score: f64,
    pub warning: String,
}

#[derive(Debug, Clone)]
pub struct ScoreReport {
    pub rows: Vec<ScoreRow>,
    pub mean: f64,
}

pub fn score(manifest: &Path, measure: Measure) -> Result<ScoreReport> {
    let m = Manifest::read(manifest)?;
    let rows = par::map(&m.rows, |row| {
        let gt = read_labels(row.gt_seg()?)?;
        let ev = read_labels(row.eval_seg()?)?;
        let e = score_maps(&gt, &ev, measure, &row.id)?;
        Ok(ScoreRow {
            id: row.id.clone(),
            k: e.gt_objects,
            k_prime: e.eval_objects,
            score: e.score.value(),
            warning: e.warning.map(|w| w.to_string()).unwrap_or_default(),
        })
    })?;
    let mean = rows.iter().map(|r| r.score).sum::<f64>() / rows.len() as f64;
    Ok(ScoreReport { rows, mean })
}

/// Writes `scores.csv` into `out`.
pub fn write(report: &ScoreReport, out: &Path) -> Result<PathBuf> {
    create_dir(out)?;
    let path = out.join("scores.csv");
    write_csv(&path, &report.rows)?;
    Ok(path)
}
