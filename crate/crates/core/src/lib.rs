//! Link-level simulation of RIS-assisted OFDM links with codebook-based
//! passive beamforming.
//!
//! The pipeline scans a codebook of reflection patterns, estimates the
//! end-to-end channel under each, and learns the pattern to use from those
//! labelled measurements. Cascaded channel estimation with element-wise
//! alternating optimization, random phases and a perfect-CSI coherent bound
//! serve as baselines.

pub mod channel;
pub mod codebook;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod metrics;
pub mod pbf;
pub mod units;

pub use error::{Error, Result};
