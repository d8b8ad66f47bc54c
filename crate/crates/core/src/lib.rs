//! Event-guided turbulence mitigation.
//!
//! Turbulent frame sequences and their event streams are simulated, the events
//! are binned into a density voxel, per-pixel fusion weights are derived from it
//! (either by inverse density or by a small trained network), and the frames are
//! fused into one restored image.

pub mod analysis;
pub mod data;
pub mod edem;
pub mod error;
pub mod filter;
pub mod fusion;
pub mod net;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
