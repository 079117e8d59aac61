//! Network input encoding.
//!
//! Inputs are centre-cropped or zero-padded to the configured square size;
//! padding is 0 intensity for the image and background for the mask.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::arch::{ArchConfig, InputEncoding, Variant};
use super::{NetError, Real};
use crate::seg::{IntensityImage, PixelClass, TrinaryMask};

/// One image/segmentation pair already fitted to the input size.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPair {
    /// `channels * side * side`, channel-major.
    pub image: Vec<f32>,
    /// `side * side` trinary classes.
    pub classes: Vec<u8>,
}

/// For each output coordinate, the source coordinate (if any).
fn fit_axis(src: usize, dst: usize) -> impl Fn(usize) -> Option<usize> {
    move |o| {
        if src >= dst {
            Some(o + (src - dst) / 2)
        } else {
            let before = (dst - src) / 2;
            o.checked_sub(before).filter(|&s| s < src)
        }
    }
}

pub fn prepare(arch: &ArchConfig, image: &IntensityImage, seg: &TrinaryMask) -> Result<PreparedPair, NetError> {
    if image.channels() != arch.image_channels {
        return Err(NetError::Shape(format!(
            "image has {} channels, network expects {}",
            image.channels(),
            arch.image_channels
        )));
    }
    if image.width() != seg.width() || image.height() != seg.height() {
        return Err(NetError::Shape(format!(
            "image is {}x{} but segmentation is {}x{}",
            image.width(),
            image.height(),
            seg.width(),
            seg.height()
        )));
    }
    let side = arch.input_size;
    let fx = fit_axis(image.width(), side);
    let fy = fit_axis(image.height(), side);
    let mut pixels = vec![0f32; arch.image_channels * side * side];
    let mut classes = vec![PixelClass::Background as u8; side * side];
    for oy in 0..side {
        let Some(sy) = fy(oy) else { continue };
        for ox in 0..side {
            let Some(sx) = fx(ox) else { continue };
            for c in 0..arch.image_channels {
                pixels[(c * side + oy) * side + ox] = image.value(c, sx, sy);
            }
            classes[oy * side + ox] = seg.class(sx, sy) as u8;
        }
    }
    Ok(PreparedPair {
        image: pixels,
        classes,
    })
}

/// Channel-major batch tensors `[n, c, side, side]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub size: usize,
    pub image: Vec<T>,
    pub seg: Vec<T>,
    /// Image channels followed by segmentation channels; naive variant only.
    pub joint: Vec<T>,
}

fn encode_classes<T: Real>(encoding: InputEncoding, classes: &[u8], out: &mut Vec<T>) {
    match encoding {
        InputEncoding::TrinaryOnehot3ch => {
            for c in 0..3u8 {
                out.extend(classes.iter().map(|&k| if k == c { T::one() } else { T::zero() }));
            }
        }
        InputEncoding::Binary1ch => {
            out.extend(classes.iter().map(|&k| if k != 0 { T::one() } else { T::zero() }));
        }
    }
}

pub fn make_batch<T: Real>(arch: &ArchConfig, pairs: &[&PreparedPair]) -> Batch<T> {
    let plane = arch.input_size * arch.input_size;
    let mut image = Vec::with_capacity(pairs.len() * plane * arch.image_channels);
    let mut seg = Vec::with_capacity(pairs.len() * plane * arch.seg_channels());
    let mut joint = Vec::new();
    for p in pairs {
        let start = seg.len();
        encode_classes(arch.input_encoding, &p.classes, &mut seg);
        if arch.variant == Variant::Naive {
            joint.extend(p.image.iter().map(|&v| T::from_f32(v).expect("finite")));
            joint.extend_from_slice(&seg[start..]);
        }
        image.extend(p.image.iter().map(|&v| T::from_f32(v).expect("finite")));
    }
    Batch {
        size: pairs.len(),
        image,
        seg,
        joint,
    }
}
