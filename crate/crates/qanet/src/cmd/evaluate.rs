//! Predictions against true quality: hit-rate curve, AUC, errors and the
//! scatter data behind them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qanet_core::measures::{hit_rate_curve, mae, mse, HitRateCurve};
use qanet_core::Measure;
use serde::Serialize;

use super::score_maps;
use crate::error::{Context, Error, Result};
use crate::imageio::read_labels;
use crate::manifest::{check_same_ids, create_dir, write_csv, Manifest};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub id: String,
    pub true_q: f64,
    pub predicted_q: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub curve: HitRateCurve,
    pub mse: f64,
    pub mae: f64,
    pub scatter: Vec<ScatterRow>,
}

impl EvalReport {
    pub fn hit_rate_at(&self, t: f64) -> f64 {
        self.curve.rate_at(t).unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CurveRow {
    tolerance: f64,
    hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SummaryRow {
    metric: &'static str,
    value: f64,
}

/// `steps + 1` evenly spaced tolerances from 0 to 1.
pub fn tolerance_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

pub fn report(truth: &[f64], pred: &[f64], ids: &[String], tolerances: &[f64]) -> Result<EvalReport> {
    let curve = hit_rate_curve(pred, truth, tolerances).input_err("hit rate")?;
    Ok(EvalReport {
        mse: mse(pred, truth).input_err("mse")?,
        mae: mae(pred, truth).input_err("mae")?,
        scatter: ids
            .iter()
            .zip(truth.iter().zip(pred))
            .map(|(id, (&t, &p))| ScatterRow {
                id: id.clone(),
                true_q: t,
                predicted_q: p,
            })
            .collect(),
        curve,
    })
}

/// Truth rows without `true_q` are scored from `gt_seg` and `eval_seg`.
pub fn evaluate(predictions: &Path, truth: &Path, tolerances: &[f64], measure: Measure) -> Result<EvalReport> {
    let (p, t) = (Manifest::read(predictions)?, Manifest::read(truth)?);
    check_same_ids(
        p.rows.iter().map(|r| r.id.as_str()),
        t.rows.iter().map(|r| r.id.as_str()),
        ("predictions", "truth"),
    )?;
    let pred_by_id: BTreeMap<&str, Option<f64>> = p.rows.iter().map(|r| (r.id.as_str(), r.predicted_q)).collect();
    let (mut ids, mut tq, mut pq) = (Vec::new(), Vec::new(), Vec::new());
    for row in &t.rows {
        let q = match row.true_q {
            Some(q) => q,
            None => {
                let gt = read_labels(row.gt_seg().map_err(|_| {
                    Error::input(format!("row {}: needs true_q or gt_seg and eval_seg", row.id))
                })?)?;
                score_maps(&gt, &read_labels(row.eval_seg()?)?, measure, &row.id)?.score.value()
            }
        };
        let pred = pred_by_id[row.id.as_str()]
            .ok_or_else(|| Error::input(format!("predictions: row {}: missing predicted_q", row.id)))?;
        ids.push(row.id.clone());
        tq.push(q);
        pq.push(pred);
    }
    report(&tq, &pq, &ids, tolerances)
}

/// Writes `hit_rate.csv`, `scatter.csv` and `summary.csv` into `out`.
pub fn write(report: &EvalReport, out: &Path) -> Result<PathBuf> {
    create_dir(out)?;
    let curve: Vec<CurveRow> = report
        .curve
        .tolerances
        .iter()
        .zip(&report.curve.rates)
        .map(|(&tolerance, &hit_rate)| CurveRow { tolerance, hit_rate })
        .collect();
    write_csv(&out.join("hit_rate.csv"), &curve)?;
    write_csv(&out.join("scatter.csv"), &report.scatter)?;
    let summary = [
        SummaryRow { metric: "mse", value: report.mse },
        SummaryRow { metric: "mae", value: report.mae },
        SummaryRow { metric: "hit_rate_0.1", value: report.hit_rate_at(0.1) },
        SummaryRow { metric: "auc", value: report.curve.auc },
    ];
    let path = out.join("summary.csv");
    write_csv(&path, &summary)?;
    Ok(path)
}
