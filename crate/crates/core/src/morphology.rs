//! Binary morphology with disc structuring elements, and its per-instance
//! application to label maps.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::grid::Grid;
use crate::seg::InstanceMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MorphOp {
    #[default]
    Identity,
    Erode,
    Dilate,
    Open,
    Close,
}

impl MorphOp {
    pub const ALL: [MorphOp; 5] = [
        MorphOp::Identity,
        MorphOp::Erode,
        MorphOp::Dilate,
        MorphOp::Open,
        MorphOp::Close,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MorphOp::Identity => "identity",
            MorphOp::Erode => "erode",
            MorphOp::Dilate => "dilate",
            MorphOp::Open => "open",
            MorphOp::Close => "close",
        }
    }
}

impl fmt::Display for MorphOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MorphOp {
    type Err = UnknownOp;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MorphOp::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s))
            .ok_or(UnknownOp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("unknown morphological operation")]
pub struct UnknownOp;

/// Offsets `(dx, dy)` with `dx² + dy² <= r²`.
pub fn disc(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    offsets
}

/// Pixels outside the grid count as background.
pub fn erode(mask: &Grid<bool>, element: &[(isize, isize)]) -> Grid<bool> {
    Grid::from_fn(mask.width(), mask.height(), |x, y| {
        element.iter().all(|&(dx, dy)| {
            mask.get_signed(x as isize + dx, y as isize + dy)
                .copied()
                .unwrap_or(false)
        })
    })
}

pub fn dilate(mask: &Grid<bool>, element: &[(isize, isize)]) -> Grid<bool> {
    Grid::from_fn(mask.width(), mask.height(), |x, y| {
        element.iter().any(|&(dx, dy)| {
            mask.get_signed(x as isize - dx, y as isize - dy)
                .copied()
                .unwrap_or(false)
        })
    })
}

pub fn apply_binary(mask: &Grid<bool>, op: MorphOp, radius: usize) -> Grid<bool> {
    let se = disc(radius);
    match op {
        MorphOp::Identity => mask.clone(),
        MorphOp::Erode => erode(mask, &se),
        MorphOp::Dilate => dilate(mask, &se),
        MorphOp::Open => dilate(&erode(mask, &se), &se),
        MorphOp::Close => erode(&dilate(mask, &se), &se),
    }
}

/// Applies `op` to every instance separately and writes the results back in
/// ascending label order; where two results collide the larger label wins.
/// Instances that vanish are dropped.
pub fn apply_morphology(map: &InstanceMap, op: MorphOp, radius: usize) -> InstanceMap {
    if op == MorphOp::Identity || radius == 0 {
        return map.clone();
    }
    let (w, h) = (map.width(), map.height());
    let margin = 2 * radius;
    let mut out = InstanceMap::background(w, h).expect("non-empty map");
    for (label, (x0, y0, x1, y1)) in bounding_boxes(map) {
        // the window contains every pixel the operation can reach
        let wx0 = x0.saturating_sub(margin);
        let wy0 = y0.saturating_sub(margin);
        let wx1 = (x1 + margin).min(w - 1);
        let wy1 = (y1 + margin).min(h - 1);
        let local = Grid::from_fn(wx1 - wx0 + 1, wy1 - wy0 + 1, |x, y| map.label(x + wx0, y + wy0) == label);
        let result = apply_binary(&local, op, radius);
        for y in 0..result.height() {
            for x in 0..result.width() {
                if *result.get(x, y) {
                    out.set_label(x + wx0, y + wy0, label);
                }
            }
        }
    }
    out
}

/// Inclusive bounding box per label, ascending by label.
fn bounding_boxes(map: &InstanceMap) -> Vec<(u16, (usize, usize, usize, usize))> {
    let mut boxes: alloc::collections::BTreeMap<u16, (usize, usize, usize, usize)> = Default::default();
    for y in 0..map.height() {
        for x in 0..map.width() {
            let l = map.label(x, y);
            if l == 0 {
                continue;
            }
            let b = boxes.entry(l).or_insert((x, y, x, y));
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
    }
    boxes.into_iter().collect()
}
