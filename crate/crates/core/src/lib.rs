//! Core algorithms for estimating instance-segmentation quality without
//! ground truth.
//!
//! The crate is `no_std` (it only needs `alloc`) and contains everything that
//! is pure computation:
//!
//! - [`seg`]: instance maps, trinary masks, connected components.
//! - [`measures`]: IoU, Dice, SEG, Best Dice, MSE, hit-rate curves.
//! - [`corrupt`]: synthetic segmentation errors (morphology + smooth warps)
//!   together with their exact quality score.
//! - [`phantom`]: a toy image/ground-truth generator.
//! - [`nn`]: the RibCage regression network and its Siamese / naive
//!   ablation variants, with exact reverse-mode gradients and optimizers.
//!
//! File formats, manifests and the command-line tool live in the `qanet`
//! crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corrupt;
pub mod filter;
pub mod grid;
pub mod measures;
pub mod morphology;
pub mod nn;
pub mod phantom;
pub mod rng;
pub mod seg;

pub use grid::Grid;
pub use measures::{Measure, QualityScore};
pub use seg::{Connectivity, InstanceMap, IntensityImage, TrinaryMask};
