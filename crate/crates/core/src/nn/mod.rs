//! The quality-regression network.
//!
//! Three architectures share one layer graph ([`arch::Graph`]):
//!
//! - **ribcage**: per block `l`,
//!   `r1[l] = f(W_r1 * r1[l-1])`, `r2[l] = f(W_r2 * r2[l-1])`,
//!   `s[l] = f(W_s * s[l-1] + W_s1 * r1[l-1] + W_s2 * r2[l-1])`, with the
//!   image and the encoded segmentation as `r1[0]`, `r2[0]` and `s[0] = 0`.
//!   `f` is batch norm followed by ReLU and every convolution is 3x3 with
//!   stride 2. The last spine output goes through the fully connected head.
//! - **siamese**: two independent convolution stacks, concatenated before
//!   the head.
//! - **naive**: image and segmentation stacked on the channel axis, one
//!   convolution stack.
//!
//! Everything is generic over [`Real`] so the same code runs in `f32` for
//! training and in `f64` for gradient checking.

pub mod arch;
pub mod encode;
pub mod network;
mod ops;
pub mod optim;
pub mod params;
pub mod train;

use alloc::string::String;
use core::fmt::Debug;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

pub use arch::{ArchConfig, InputEncoding, ParamKind, Variant};
pub use encode::{make_batch, prepare, Batch, PreparedPair};
pub use network::{backward, forward, mse_loss, predict, Cache, Mode};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Gradients, ModelParams};
pub use train::{EpochStats, LrSchedule, TrainConfig, Trainer};

pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Send
    + Sync
    + core::iter::Sum
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("invalid architecture: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("backward needs a train-mode cache for this batch: {0}")]
    StaleCache(&'static str),
    #[error("invalid training config: {0}")]
    Train(String),
}
