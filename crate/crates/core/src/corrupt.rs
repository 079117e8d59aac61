//! Synthetic segmentation errors.
//!
//! A ground-truth map is first passed through a random per-instance
//! morphological operation and then warped by a smooth random displacement
//! field. The exact quality of the result against the ground truth is
//! recorded with it, which is what makes the pair usable as a training
//! example.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::filter::{convolve_separable, gaussian_kernel};
use crate::grid::Grid;
use crate::measures::{evaluate, Measure, MeasureError, MeasureWarning, QualityScore};
use crate::morphology::{apply_morphology, MorphOp};
use crate::rng::{self, STREAM_FIELD, STREAM_PARAMS};
use crate::seg::InstanceMap;

pub const DEFAULT_FIELD_AMPLITUDE: f64 = 512.0;
pub const DEFAULT_FIELD_SIGMA: f64 = 38.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorruptError {
    #[error("kernel radius must be at least 1 for {0}")]
    ZeroRadius(MorphOp),
    #[error("field sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("field amplitude must be non-negative, got {0}")]
    BadAmplitude(f64),
    #[error("field is {0}x{1} but map is {2}x{3}")]
    FieldShape(usize, usize, usize, usize),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Image domain; selects the range of the morphology radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Cells,
    Leaves,
}

impl Domain {
    pub fn max_kernel_radius(self) -> usize {
        match self {
            Domain::Cells => 4,
            Domain::Leaves => 6,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Cells => "cells",
            Domain::Leaves => "leaves",
        })
    }
}

impl FromStr for Domain {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cells" => Ok(Domain::Cells),
            "leaves" => Ok(Domain::Leaves),
            _ => Err("expected cells or leaves"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CorruptionParams {
    pub op: MorphOp,
    /// Disc radius; 0 for the identity operation.
    pub kernel_radius: usize,
    /// Half-range of the raw uniform displacement samples.
    pub field_amplitude: f64,
    /// Standard deviation of the smoothing Gaussian, in pixels.
    pub field_sigma: f64,
    pub seed: u64,
}

impl CorruptionParams {
    /// No morphology and a zero field.
    pub fn identity(seed: u64) -> Self {
        Self {
            op: MorphOp::Identity,
            kernel_radius: 0,
            field_amplitude: 0.0,
            field_sigma: DEFAULT_FIELD_SIGMA,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CorruptError> {
        if self.op != MorphOp::Identity && self.kernel_radius == 0 {
            return Err(CorruptError::ZeroRadius(self.op));
        }
        if !(self.field_sigma > 0.0) {
            return Err(CorruptError::BadSigma(self.field_sigma));
        }
        if !(self.field_amplitude >= 0.0) {
            return Err(CorruptError::BadAmplitude(self.field_amplitude));
        }
        Ok(())
    }
}

/// Draws an operation uniformly from the five states and, for a real
/// operation, a radius uniformly from `1..=max` for the domain.
pub fn sample_params(seed: u64, domain: Domain) -> CorruptionParams {
    let mut rng = rng::stream(seed, STREAM_PARAMS);
    let op = MorphOp::ALL[rng.random_range(0..MorphOp::ALL.len())];
    let kernel_radius = if op == MorphOp::Identity {
        0
    } else {
        rng.random_range(1..=domain.max_kernel_radius())
    };
    CorruptionParams {
        op,
        kernel_radius,
        field_amplitude: DEFAULT_FIELD_AMPLITUDE,
        field_sigma: DEFAULT_FIELD_SIGMA,
        seed,
    }
}

/// Per-pixel displacement `(dx, dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub dx: Grid<f64>,
    pub dy: Grid<f64>,
}

impl VectorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            dx: Grid::filled(width, height, 0.0),
            dy: Grid::filled(width, height, 0.0),
        }
    }

    pub fn constant(width: usize, height: usize, dx: f64, dy: f64) -> Self {
        Self {
            dx: Grid::filled(width, height, dx),
            dy: Grid::filled(width, height, dy),
        }
    }

    pub fn width(&self) -> usize {
        self.dx.width()
    }

    pub fn height(&self) -> usize {
        self.dx.height()
    }
}

/// I.i.d. `U(-amplitude, amplitude)` per pixel and component (all of `dx`
/// in raster order, then all of `dy`), each component smoothed by a
/// normalised Gaussian truncated at 3 sigma with reflected borders.
pub fn sample_smooth_field(
    width: usize,
    height: usize,
    amplitude: f64,
    sigma: f64,
    seed: u64,
) -> Result<VectorField, CorruptError> {
    if !(sigma > 0.0) {
        return Err(CorruptError::BadSigma(sigma));
    }
    if !(amplitude >= 0.0) {
        return Err(CorruptError::BadAmplitude(amplitude));
    }
    if amplitude == 0.0 {
        return Ok(VectorField::zeros(width, height));
    }
    let mut rng = rng::stream(seed, STREAM_FIELD);
    let mut raw = || {
        let v: Vec<f64> = (0..width * height)
            .map(|_| rng::uniform(&mut rng, -amplitude, amplitude))
            .collect();
        Grid::from_vec(width, height, v).expect("sized")
    };
    let (raw_x, raw_y) = (raw(), raw());
    let taps = gaussian_kernel(sigma);
    Ok(VectorField {
        dx: convolve_separable(&raw_x, &taps),
        dy: convolve_separable(&raw_y, &taps),
    })
}

/// Backward nearest-neighbour warp: `out(p) = map(round(p + v(p)))`, with
/// background wherever the source falls outside the grid.
pub fn warp_labels(map: &InstanceMap, field: &VectorField) -> Result<InstanceMap, CorruptError> {
    if field.width() != map.width() || field.height() != map.height() {
        return Err(CorruptError::FieldShape(
            field.width(),
            field.height(),
            map.width(),
            map.height(),
        ));
    }
    let grid = map.grid();
    let warped = Grid::from_fn(map.width(), map.height(), |x, y| {
        let sx = libm::round(x as f64 + *field.dx.get(x, y));
        let sy = libm::round(y as f64 + *field.dy.get(x, y));
        grid.get_signed(sx as isize, sy as isize).copied().unwrap_or(0)
    });
    Ok(InstanceMap::from_grid(warped).expect("same shape"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedPair {
    pub corrupted: InstanceMap,
    pub params: CorruptionParams,
    pub measure: Measure,
    pub true_q: QualityScore,
    pub warning: Option<MeasureWarning>,
}

/// Morphology, then a smooth warp, then the exact score against `gt`.
pub fn corrupt(gt: &InstanceMap, params: &CorruptionParams, measure: Measure) -> Result<CorruptedPair, CorruptError> {
    params.validate()?;
    let shaped = apply_morphology(gt, params.op, params.kernel_radius);
    let field = sample_smooth_field(
        gt.width(),
        gt.height(),
        params.field_amplitude,
        params.field_sigma,
        params.seed,
    )?;
    let corrupted = warp_labels(&shaped, &field)?;
    let eval = evaluate(measure, gt, &corrupted)?;
    Ok(CorruptedPair {
        corrupted,
        params: *params,
        measure,
        true_q: eval.score,
        warning: eval.warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn blob_map() -> InstanceMap {
        let mut m = InstanceMap::background(16, 16).unwrap();
        for y in 2..7 {
            for x in 2..7 {
                m.set_label(x, y, 1);
            }
        }
        for y in 9..14 {
            for x in 8..14 {
                m.set_label(x, y, 2);
            }
        }
        m
    }

    #[test]
    fn params_are_deterministic() {
        assert_eq!(sample_params(99, Domain::Cells), sample_params(99, Domain::Cells));
    }

    #[test]
    fn leaf_radius_range() {
        let radii: alloc::collections::BTreeSet<usize> = (0..2000)
            .map(|s| sample_params(s, Domain::Leaves))
            .filter(|p| p.op != MorphOp::Identity)
            .map(|p| p.kernel_radius)
            .collect();
        assert_eq!(radii.into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn cells_radius_range() {
        for s in 0..2000 {
            let p = sample_params(s, Domain::Cells);
            if p.op == MorphOp::Identity {
                assert_eq!(p.kernel_radius, 0);
            } else {
                assert!((1..=4).contains(&p.kernel_radius));
            }
            assert_eq!(p.field_amplitude, 512.0);
            assert_eq!(p.field_sigma, 38.0);
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let f = sample_smooth_field(5, 4, 0.0, 3.0, 1).unwrap();
        assert_eq!(f, VectorField::zeros(5, 4));
    }

    #[test]
    fn field_is_deterministic() {
        let a = sample_smooth_field(20, 12, 512.0, 38.0, 5).unwrap();
        let b = sample_smooth_field(20, 12, 512.0, 38.0, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_field_parameters() {
        assert!(sample_smooth_field(4, 4, 1.0, 0.0, 0).is_err());
        assert!(sample_smooth_field(4, 4, -1.0, 1.0, 0).is_err());
    }

    #[test]
    fn zero_field_warp_is_identity() {
        let m = blob_map();
        assert_eq!(warp_labels(&m, &VectorField::zeros(16, 16)).unwrap(), m);
    }

    #[test]
    fn constant_field_translates() {
        let m = InstanceMap::from_labels(5, 1, vec![0, 0, 3, 4, 0]).unwrap();
        // out(x) = m(x + 2)
        let w = warp_labels(&m, &VectorField::constant(5, 1, 2.0, 0.0)).unwrap();
        assert_eq!(w.as_slice(), &[3, 4, 0, 0, 0]);
    }

    #[test]
    fn warp_rejects_mismatched_field() {
        let m = blob_map();
        assert!(matches!(
            warp_labels(&m, &VectorField::zeros(3, 3)),
            Err(CorruptError::FieldShape(..))
        ));
    }

    #[test]
    fn identity_params_score_one() {
        let gt = blob_map();
        for measure in [Measure::Seg, Measure::BestDice] {
            let pair = corrupt(&gt, &CorruptionParams::identity(3), measure).unwrap();
            assert_eq!(pair.corrupted, gt);
            assert_eq!(pair.true_q.value(), 1.0);
        }
    }

    #[test]
    fn total_erosion_scores_zero_best_dice() {
        let gt = blob_map();
        let params = CorruptionParams {
            op: MorphOp::Erode,
            kernel_radius: 4,
            ..CorruptionParams::identity(1)
        };
        let pair = corrupt(&gt, &params, Measure::BestDice).unwrap();
        assert_eq!(pair.true_q.value(), 0.0);
        assert_eq!(pair.warning, Some(MeasureWarning::NoEvaluatedObjects));
    }

    #[test]
    fn zero_radius_morphology_is_invalid() {
        let params = CorruptionParams {
            op: MorphOp::Dilate,
            ..CorruptionParams::identity(1)
        };
        assert_eq!(
            corrupt(&blob_map(), &params, Measure::Seg),
            Err(CorruptError::ZeroRadius(MorphOp::Dilate))
        );
    }

    #[test]
    fn seg_on_empty_gt_propagates() {
        let gt = InstanceMap::background(4, 4).unwrap();
        assert!(matches!(
            corrupt(&gt, &CorruptionParams::identity(0), Measure::Seg),
            Err(CorruptError::Measure(MeasureError::EmptyGroundTruth))
        ));
    }
}
