//! File formats and experiment drivers around `qanet-core`.
//!
//! Everything on disk is PNG, CSV or JSON except the model checkpoint. The
//! command implementations in [`cmd`] are plain functions so tests and the
//! binary share one code path.

pub mod checkpoint;
pub mod cmd;
pub mod error;
pub mod imageio;
pub mod manifest;
pub mod par;

pub use error::{Error, Result};
