//! Two segmentations of the same images scored against each other, each
//! taking a turn as the stand-in ground truth.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qanet_core::Measure;
use serde::Serialize;

use super::score_maps;
use crate::error::Result;
use crate::imageio::read_labels;
use crate::manifest::{check_same_ids, create_dir, write_csv, Manifest};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossRow {
    pub id: String,
    /// Score of b with a as ground truth.
    pub a_as_gt: f64,
    /// Score of a with b as ground truth.
    pub b_as_gt: f64,
}

#[derive(Debug, Clone)]
pub struct CrossReport {
    pub rows: Vec<CrossRow>,
    pub mean_a_as_gt: f64,
    pub mean_b_as_gt: f64,
}

pub fn cross_eval(a: &Path, b: &Path, measure: Measure) -> Result<CrossReport> {
    let (ma, mb) = (Manifest::read(a)?, Manifest::read(b)?);
    check_same_ids(
        ma.rows.iter().map(|r| r.id.as_str()),
        mb.rows.iter().map(|r| r.id.as_str()),
        ("a", "b"),
    )?;
    let by_id: BTreeMap<&str, _> = mb.rows.iter().map(|r| (r.id.as_str(), r)).collect();
    let rows = par::map(&ma.rows, |ra| {
        let rb = by_id[ra.id.as_str()];
        let sa = read_labels(ra.eval_seg()?)?;
        let sb = read_labels(rb.eval_seg()?)?;
        Ok(CrossRow {
            id: ra.id.clone(),
            a_as_gt: score_maps(&sa, &sb, measure, &ra.id)?.score.value(),
            b_as_gt: score_maps(&sb, &sa, measure, &ra.id)?.score.value(),
        })
    })?;
    let n = rows.len() as f64;
    Ok(CrossReport {
        mean_a_as_gt: rows.iter().map(|r| r.a_as_gt).sum::<f64>() / n,
        mean_b_as_gt: rows.iter().map(|r| r.b_as_gt).sum::<f64>() / n,
        rows,
    })
}

pub fn write(report: &CrossReport, out: &Path) -> Result<PathBuf> {
    create_dir(out)?;
    let path = out.join("cross_eval.csv");
    write_csv(&path, &report.rows)?;
    Ok(path)
}
