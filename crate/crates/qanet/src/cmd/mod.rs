//! One function per CLI subcommand.

pub mod corrupt;
pub mod cross_eval;
pub mod demo;
pub mod evaluate;
pub mod predict;
pub mod score;
pub mod synth;
pub mod train;

use qanet_core::nn::{prepare, ArchConfig, PreparedPair};
use qanet_core::seg::instance_to_trinary;
use qanet_core::measures::{evaluate as measure, Evaluation};
use qanet_core::{InstanceMap, Measure};

use crate::error::{Context, Error, Result};
use crate::imageio;
use crate::manifest::{Manifest, Row};
use crate::par;

/// Image and evaluated segmentation of one row, fitted to the network input.
/// Ground truth is never opened.
pub fn load_pair(row: &Row, arch: &ArchConfig) -> Result<PreparedPair> {
    let image = imageio::read_image(row.image()?)?;
    let seg = imageio::read_labels(row.eval_seg()?)?;
    prepare(arch, &image, &instance_to_trinary(&seg)).input_err(format_args!("row {}", row.id))
}

pub fn load_pairs(manifest: &Manifest, arch: &ArchConfig) -> Result<Vec<PreparedPair>> {
    par::map(&manifest.rows, |r| load_pair(r, arch))
}

/// Channel count of the first image, so the network can follow the data.
pub fn image_channels(manifest: &Manifest) -> Result<usize> {
    Ok(imageio::read_image(manifest.rows[0].image()?)?.channels())
}

pub(crate) fn score_maps(gt: &InstanceMap, ev: &InstanceMap, m: Measure, id: &str) -> Result<Evaluation> {
    measure(m, gt, ev).map_err(|e| Error::input(format!("row {id}: {e}")))
}

