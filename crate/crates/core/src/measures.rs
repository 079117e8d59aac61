//! Quality measures for instance segmentations and statistics for judging
//! quality predictions.
//!
//! SEG and Best Dice are computed from a sparse contingency table of
//! `(gt label, evaluated label)` overlap counts built in one pass over the
//! pixels.
//!
//! SEG is written here as a per-ground-truth-object maximum: an object `c` is
//! matched to the evaluated object `c'` with `|c ∩ c'| > |c| / 2`. At most one
//! such `c'` can exist (two of them would need more than `|c|` pixels of
//! `c`), so this is the same as summing over all pairs with the indicator.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::grid::Grid;
use crate::seg::InstanceMap;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("undefined IoU: both pixel sets are empty")]
    UndefinedIou,
    #[error("undefined Dice: both pixel sets are empty")]
    UndefinedDice,
    #[error("SEG undefined for empty ground truth")]
    EmptyGroundTruth,
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("length mismatch: {0} predictions vs {1} targets")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("invalid tolerance grid: {0}")]
    BadTolerances(&'static str),
    #[error("quality score {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("unknown measure {0:?} (expected seg or bd)")]
    UnknownMeasure(alloc::string::String),
}

/// A quality value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct QualityScore(f64);

impl QualityScore {
    pub const ZERO: Self = Self(0.0);
    pub const ONE: Self = Self(1.0);

    pub fn new(value: f64) -> Result<Self, MeasureError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(MeasureError::OutOfRange(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for QualityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Mean IoU of matched ground-truth objects (match = more than half of
    /// the object covered).
    #[default]
    Seg,
    /// Mean over evaluated objects of their best Dice against ground truth.
    #[serde(rename = "bd")]
    BestDice,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Seg => "seg",
            Measure::BestDice => "bd",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "seg" => Ok(Measure::Seg),
            "bd" | "best_dice" | "bestdice" => Ok(Measure::BestDice),
            _ => Err(MeasureError::UnknownMeasure(s.into())),
        }
    }
}

/// Non-fatal degenerate cases reported alongside a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureWarning {
    /// Best Dice over zero evaluated objects; scored as 0.
    NoEvaluatedObjects,
}

impl fmt::Display for MeasureWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureWarning::NoEvaluatedObjects => {
                f.write_str("evaluated segmentation has no objects; best dice set to 0")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub score: QualityScore,
    pub gt_objects: usize,
    pub eval_objects: usize,
    pub warning: Option<MeasureWarning>,
}

fn same_shape<T, U>(a: &Grid<T>, b: &Grid<U>) -> Result<(), MeasureError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(MeasureError::ShapeMismatch(a.width(), a.height(), b.width(), b.height()))
    }
}

fn set_counts(a: &Grid<bool>, b: &Grid<bool>) -> Result<(usize, usize, usize), MeasureError> {
    same_shape(a, b)?;
    let (mut na, mut nb, mut both) = (0, 0, 0);
    for (&pa, &pb) in a.as_slice().iter().zip(b.as_slice()) {
        na += pa as usize;
        nb += pb as usize;
        both += (pa && pb) as usize;
    }
    Ok((na, nb, both))
}

#[inline]
fn iou_counts(a: usize, b: usize, inter: usize) -> f64 {
    inter as f64 / (a + b - inter) as f64
}

#[inline]
fn dice_counts(a: usize, b: usize, inter: usize) -> f64 {
    (2 * inter) as f64 / (a + b) as f64
}

/// `|a ∩ b| / |a ∪ b|` over two pixel sets given as masks on the same grid.
pub fn iou(a: &Grid<bool>, b: &Grid<bool>) -> Result<QualityScore, MeasureError> {
    let (na, nb, both) = set_counts(a, b)?;
    if na + nb == 0 {
        return Err(MeasureError::UndefinedIou);
    }
    Ok(QualityScore(iou_counts(na, nb, both)))
}

/// `2 |a ∩ b| / (|a| + |b|)`.
pub fn dice(a: &Grid<bool>, b: &Grid<bool>) -> Result<QualityScore, MeasureError> {
    let (na, nb, both) = set_counts(a, b)?;
    if na + nb == 0 {
        return Err(MeasureError::UndefinedDice);
    }
    Ok(QualityScore(dice_counts(na, nb, both)))
}

/// Object areas and pairwise overlaps of two instance maps.
#[derive(Debug, Clone, Default)]
pub struct Contingency {
    pub gt_areas: BTreeMap<u16, usize>,
    pub eval_areas: BTreeMap<u16, usize>,
    /// Only pairs with a non-empty intersection appear.
    pub overlaps: BTreeMap<(u16, u16), usize>,
}

impl Contingency {
    pub fn build(gt: &InstanceMap, ev: &InstanceMap) -> Result<Self, MeasureError> {
        same_shape(gt.grid(), ev.grid())?;
        let mut table = Self::default();
        for (&g, &e) in gt.as_slice().iter().zip(ev.as_slice()) {
            if g != 0 {
                *table.gt_areas.entry(g).or_insert(0) += 1;
            }
            if e != 0 {
                *table.eval_areas.entry(e).or_insert(0) += 1;
            }
            if g != 0 && e != 0 {
                *table.overlaps.entry((g, e)).or_insert(0) += 1;
            }
        }
        Ok(table)
    }

    fn seg(&self) -> f64 {
        let mut sums: BTreeMap<u16, f64> = BTreeMap::new();
        for (&(g, e), &inter) in &self.overlaps {
            let area = self.gt_areas[&g];
            // strict majority, exact in integers
            if 2 * inter > area {
                sums.insert(g, iou_counts(area, self.eval_areas[&e], inter));
            }
        }
        sorted_sum(sums.into_values().collect()) / self.gt_areas.len() as f64
    }

    fn best_dice(&self) -> f64 {
        let mut best: BTreeMap<u16, f64> = self.eval_areas.keys().map(|&e| (e, 0.0)).collect();
        for (&(g, e), &inter) in &self.overlaps {
            let d = dice_counts(self.gt_areas[&g], self.eval_areas[&e], inter);
            let slot = best.get_mut(&e).expect("eval label present");
            if d > *slot {
                *slot = d;
            }
        }
        sorted_sum(best.into_values().collect()) / self.eval_areas.len() as f64
    }
}

/// Summing in value order makes the result independent of label ids.
fn sorted_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(|a, b| a.total_cmp(b));
    // folding from +0 keeps an all-zero mean from printing as -0
    terms.into_iter().fold(0.0, |acc, t| acc + t)
}

/// Mean SEG over ground-truth objects.
pub fn seg_measure(gt: &InstanceMap, ev: &InstanceMap) -> Result<QualityScore, MeasureError> {
    evaluate(Measure::Seg, gt, ev).map(|e| e.score)
}

/// Mean best Dice over evaluated objects. With no evaluated objects the
/// score is 0 and a warning is attached.
pub fn best_dice(gt: &InstanceMap, ev: &InstanceMap) -> Result<Evaluation, MeasureError> {
    evaluate(Measure::BestDice, gt, ev)
}

pub fn evaluate(measure: Measure, gt: &InstanceMap, ev: &InstanceMap) -> Result<Evaluation, MeasureError> {
    let table = Contingency::build(gt, ev)?;
    let (gt_objects, eval_objects) = (table.gt_areas.len(), table.eval_areas.len());
    let (value, warning) = match measure {
        Measure::Seg => {
            if gt_objects == 0 {
                return Err(MeasureError::EmptyGroundTruth);
            }
            (table.seg(), None)
        }
        Measure::BestDice => {
            if eval_objects == 0 {
                (0.0, Some(MeasureWarning::NoEvaluatedObjects))
            } else {
                (table.best_dice(), None)
            }
        }
    };
    Ok(Evaluation {
        score: QualityScore(value),
        gt_objects,
        eval_objects,
        warning,
    })
}

/// Scores `b` treating `a` as a stand-in ground truth.
pub fn cross_method_score(a: &InstanceMap, b: &InstanceMap, measure: Measure) -> Result<Evaluation, MeasureError> {
    evaluate(measure, a, b)
}

fn check_pairs(pred: &[f64], truth: &[f64]) -> Result<(), MeasureError> {
    if pred.len() != truth.len() {
        return Err(MeasureError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(MeasureError::Empty);
    }
    Ok(())
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64, MeasureError> {
    check_pairs(pred, truth)?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, MeasureError> {
    check_pairs(pred, truth)?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| libm::fabs(p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// Fraction of pairs with `|pred - truth| <= tolerance`.
pub fn hit_rate(pred: &[f64], truth: &[f64], tolerance: f64) -> Result<f64, MeasureError> {
    check_pairs(pred, truth)?;
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| libm::fabs(*p - *t) <= tolerance)
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

/// `0.00, 0.01, ..., 1.00`.
pub fn default_tolerances() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HitRateCurve {
    pub tolerances: Vec<f64>,
    pub rates: Vec<f64>,
    /// Trapezoidal area under `rates` over `tolerances`, normalised by the
    /// tolerance span.
    pub auc: f64,
}

impl HitRateCurve {
    /// Rate at the largest grid tolerance not exceeding `t`.
    pub fn rate_at(&self, t: f64) -> Option<f64> {
        self.tolerances
            .iter()
            .rposition(|&x| x <= t)
            .map(|i| self.rates[i])
    }
}

pub fn hit_rate_curve(pred: &[f64], truth: &[f64], tolerances: &[f64]) -> Result<HitRateCurve, MeasureError> {
    check_pairs(pred, truth)?;
    if tolerances.len() < 2 {
        return Err(MeasureError::BadTolerances("need at least two tolerances"));
    }
    if tolerances.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(MeasureError::BadTolerances("tolerances must be strictly ascending"));
    }
    if tolerances[0] < 0.0 || tolerances[tolerances.len() - 1] != 1.0 {
        return Err(MeasureError::BadTolerances("tolerances must lie in [0, 1] and end at 1"));
    }
    let mut errors: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| libm::fabs(p - t)).collect();
    errors.sort_by(|a, b| a.total_cmp(b));
    let n = errors.len() as f64;
    let rates: Vec<f64> = tolerances
        .iter()
        .map(|&t| errors.partition_point(|&e| e <= t) as f64 / n)
        .collect();
    // Integrate the miss rate so that a perfect predictor gives exactly 1.
    let span = tolerances[tolerances.len() - 1] - tolerances[0];
    let missed: f64 = tolerances
        .windows(2)
        .zip(rates.windows(2))
        .map(|(t, r)| ((1.0 - r[0]) + (1.0 - r[1])) * 0.5 * (t[1] - t[0]))
        .sum();
    let auc = (1.0 - missed / span).clamp(0.0, 1.0);
    Ok(HitRateCurve {
        tolerances: tolerances.to_vec(),
        rates,
        auc,
    })
}
