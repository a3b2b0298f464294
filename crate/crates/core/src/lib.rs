//! Radar gesture recognition pipeline: synthetic FMCW scenes, range-Doppler
//! preprocessing, conventional and spiking temporal classifiers trained from
//! scratch, magnitude pruning, and sparsity-aware FLOP profiling.

pub mod augment;
mod binio;
pub mod complexity;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod pruning;
pub mod radar_dsp;
pub mod scene_sim;
pub mod snn;

pub use error::{Error, Result};
