//! Segmentation data model.
//!
//! An [`InstanceMap`] stores one label per pixel (0 is background). A
//! [`TrinaryMask`] is the per-pixel background / foreground / boundary
//! encoding fed to the network. Boundaries are the one-pixel-wide inner
//! boundary of each instance under 4-adjacency.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::grid::Grid;

/// Labels must fit the 16-bit PNG interchange format.
pub const MAX_LABEL: u32 = u16::MAX as u32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SegError {
    #[error("grid dimensions must be positive, got {width}x{height}")]
    EmptyGrid { width: usize, height: usize },
    #[error("expected {expected} values, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("more than {MAX_LABEL} instances")]
    TooManyInstances,
    #[error("invalid trinary class value {0}")]
    InvalidClass(u8),
    #[error("image must have 1 or 3 channels, got {0}")]
    BadChannels(usize),
    #[error("intensity value {0} outside [0, 1]")]
    IntensityOutOfRange(f32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &NEIGHBORS_4,
            Connectivity::Eight => &NEIGHBORS_8,
        }
    }
}

const NEIGHBORS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

fn check_dims(width: usize, height: usize) -> Result<(), SegError> {
    if width == 0 || height == 0 {
        Err(SegError::EmptyGrid { width, height })
    } else {
        Ok(())
    }
}

/// Per-pixel instance labels; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstanceMap {
    labels: Grid<u16>,
}

impl InstanceMap {
    /// All-background map.
    pub fn background(width: usize, height: usize) -> Result<Self, SegError> {
        check_dims(width, height)?;
        Ok(Self {
            labels: Grid::filled(width, height, 0),
        })
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<u16>) -> Result<Self, SegError> {
        check_dims(width, height)?;
        let actual = labels.len();
        let labels = Grid::from_vec(width, height, labels).ok_or(SegError::BadLength {
            expected: width * height,
            actual,
        })?;
        Ok(Self { labels })
    }

    pub fn from_grid(labels: Grid<u16>) -> Result<Self, SegError> {
        check_dims(labels.width(), labels.height())?;
        Ok(Self { labels })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.labels.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.labels.height()
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u16 {
        *self.labels.get(x, y)
    }

    #[inline]
    pub fn set_label(&mut self, x: usize, y: usize, label: u16) {
        self.labels.set(x, y, label);
    }

    #[inline]
    pub fn as_slice(&self) -> &[u16] {
        self.labels.as_slice()
    }

    pub fn grid(&self) -> &Grid<u16> {
        &self.labels
    }

    pub fn into_grid(self) -> Grid<u16> {
        self.labels
    }

    /// Distinct non-zero labels, ascending.
    pub fn instance_ids(&self) -> Vec<u16> {
        let set: BTreeSet<u16> = self.as_slice().iter().copied().filter(|&l| l != 0).collect();
        set.into_iter().collect()
    }

    pub fn instance_count(&self) -> usize {
        self.instance_ids().len()
    }

    /// Pixel count per non-zero label.
    pub fn areas(&self) -> BTreeMap<u16, usize> {
        let mut areas = BTreeMap::new();
        for &l in self.as_slice() {
            if l != 0 {
                *areas.entry(l).or_insert(0) += 1;
            }
        }
        areas
    }

    /// Binary mask of a single label.
    pub fn mask_of(&self, label: u16) -> Grid<bool> {
        self.labels.map(|&l| l == label)
    }

    pub fn foreground(&self) -> Grid<bool> {
        self.labels.map(|&l| l != 0)
    }

    /// Applies `f` to every non-zero label; background is left untouched.
    pub fn map_labels(&self, mut f: impl FnMut(u16) -> u16) -> Self {
        Self {
            labels: self.labels.map(|&l| if l == 0 { 0 } else { f(l) }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum PixelClass {
    #[default]
    Background = 0,
    Foreground = 1,
    Boundary = 2,
}

impl PixelClass {
    pub fn from_u8(v: u8) -> Result<Self, SegError> {
        match v {
            0 => Ok(Self::Background),
            1 => Ok(Self::Foreground),
            2 => Ok(Self::Boundary),
            other => Err(SegError::InvalidClass(other)),
        }
    }
}

/// Per-pixel background / foreground / boundary classes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrinaryMask {
    classes: Grid<PixelClass>,
}

impl TrinaryMask {
    pub fn from_classes(width: usize, height: usize, values: &[u8]) -> Result<Self, SegError> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(SegError::BadLength {
                expected: width * height,
                actual: values.len(),
            });
        }
        let classes = values
            .iter()
            .map(|&v| PixelClass::from_u8(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            classes: Grid::from_vec(width, height, classes).expect("length checked"),
        })
    }

    pub fn from_grid(classes: Grid<PixelClass>) -> Result<Self, SegError> {
        check_dims(classes.width(), classes.height())?;
        Ok(Self { classes })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.classes.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.classes.height()
    }

    #[inline]
    pub fn class(&self, x: usize, y: usize) -> PixelClass {
        *self.classes.get(x, y)
    }

    #[inline]
    pub fn as_slice(&self) -> &[PixelClass] {
        self.classes.as_slice()
    }

    pub fn grid(&self) -> &Grid<PixelClass> {
        &self.classes
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.as_slice().iter().map(|&c| c as u8).collect()
    }

    pub fn count(&self, class: PixelClass) -> usize {
        self.as_slice().iter().filter(|&&c| c == class).count()
    }
}

/// Planar float image with 1 or 3 channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl IntensityImage {
    /// `data` is channel-major: all of channel 0, then channel 1, ...
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self, SegError> {
        check_dims(width, height)?;
        if channels != 1 && channels != 3 {
            return Err(SegError::BadChannels(channels));
        }
        if data.len() != width * height * channels {
            return Err(SegError::BadLength {
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        if let Some(&bad) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(SegError::IntensityOutOfRange(bad));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_gray(gray: &Grid<f32>) -> Result<Self, SegError> {
        Self::new(gray.width(), gray.height(), 1, gray.as_slice().to_vec())
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn value(&self, channel: usize, x: usize, y: usize) -> f32 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Labels connected foreground components `1..=N` in order of first
/// appearance in a raster scan.
pub fn connected_components(mask: &Grid<bool>, connectivity: Connectivity) -> Result<InstanceMap, SegError> {
    check_dims(mask.width(), mask.height())?;
    label_components(mask.width(), mask.height(), |i| mask.as_slice()[i], connectivity)
}

fn label_components(
    width: usize,
    height: usize,
    is_fg: impl Fn(usize) -> bool,
    connectivity: Connectivity,
) -> Result<InstanceMap, SegError> {
    let mut labels = vec![0u16; width * height];
    let mut next: u32 = 0;
    let mut queue = VecDeque::new();
    for start in 0..width * height {
        if !is_fg(start) || labels[start] != 0 {
            continue;
        }
        next += 1;
        if next > MAX_LABEL {
            return Err(SegError::TooManyInstances);
        }
        let label = next as u16;
        labels[start] = label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx as usize >= width || ny as usize >= height {
                    continue;
                }
                let j = ny as usize * width + nx as usize;
                if is_fg(j) && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
    }
    InstanceMap::from_labels(width, height, labels)
}

/// Background / foreground / 1-pixel inner boundary encoding.
///
/// An instance pixel is boundary iff one of its 4-neighbours carries a
/// different label. Pixels outside the grid count as background, so
/// instances touching the border are closed off there.
pub fn instance_to_trinary(map: &InstanceMap) -> TrinaryMask {
    let grid = map.grid();
    let classes = Grid::from_fn(map.width(), map.height(), |x, y| {
        let l = *grid.get(x, y);
        if l == 0 {
            return PixelClass::Background;
        }
        let differs = NEIGHBORS_4.iter().any(|&(dx, dy)| {
            grid.get_signed(x as isize + dx, y as isize + dy)
                .is_none_or(|&n| n != l)
        });
        if differs {
            PixelClass::Boundary
        } else {
            PixelClass::Foreground
        }
    });
    TrinaryMask { classes }
}

/// Recovers instances from a trinary mask: components of the foreground
/// class, then boundary pixels are absorbed by the nearest component.
pub fn trinary_to_instances(mask: &TrinaryMask, connectivity: Connectivity) -> Result<InstanceMap, SegError> {
    let mut map = trinary_foreground_instances(mask, connectivity)?;
    absorb_boundary(mask, &mut map);
    Ok(map)
}

/// Components of the foreground class only; boundary pixels stay background.
pub fn trinary_foreground_instances(
    mask: &TrinaryMask,
    connectivity: Connectivity,
) -> Result<InstanceMap, SegError> {
    let classes = mask.as_slice();
    label_components(
        mask.width(),
        mask.height(),
        |i| classes[i] == PixelClass::Foreground,
        connectivity,
    )
}

/// Level-synchronous multi-source BFS through boundary pixels. Each boundary
/// pixel takes the smallest label among its already-labelled 4-neighbours at
/// the moment its distance level is reached.
fn absorb_boundary(mask: &TrinaryMask, map: &mut InstanceMap) {
    let (w, h) = (mask.width(), mask.height());
    let classes = mask.as_slice();
    let mut labels = map.as_slice().to_vec();
    let mut frontier: Vec<usize> = (0..w * h).filter(|&i| labels[i] != 0).collect();
    let mut candidates = Vec::new();
    while !frontier.is_empty() {
        candidates.clear();
        for &i in &frontier {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in &NEIGHBORS_4 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if classes[j] == PixelClass::Boundary && labels[j] == 0 {
                    candidates.push(j);
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        let assigned: Vec<(usize, u16)> = candidates
            .iter()
            .map(|&j| {
                let (x, y) = ((j % w) as isize, (j / w) as isize);
                let best = NEIGHBORS_4
                    .iter()
                    .filter_map(|&(dx, dy)| {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                            None
                        } else {
                            Some(labels[ny as usize * w + nx as usize])
                        }
                    })
                    .filter(|&l| l != 0)
                    .min()
                    .expect("candidate has a labelled neighbour");
                (j, best)
            })
            .collect();
        frontier.clear();
        for (j, l) in assigned {
            labels[j] = l;
            frontier.push(j);
        }
    }
    *map = InstanceMap::from_labels(w, h, labels).expect("same shape");
}

/// Renumbers labels to `1..=N` in ascending order of the original ids.
pub fn relabel_sequential(map: &InstanceMap) -> InstanceMap {
    let lookup: BTreeMap<u16, u16> = map
        .instance_ids()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, (i + 1) as u16))
        .collect();
    map.map_labels(|l| lookup[&l])
}
