//! Radial length estimation of radar targets from high resolution range
//! profiles (HRRP).
//!
//! - [`hrrp_sim`]: synthetic labelled HRRP datasets from point-scatterer targets.
//! - [`gaf`]: Gramian angular field encoding of 1D profiles.
//! - [`threshold_baseline`]: noise-threshold edge detection baseline.
//! - [`nn`]: tensor engine, 1D CNN and toy residual GAF regressor.
//! - [`bench`](mod@bench): mean relative error, method comparison and artifact export.

pub mod bench;
pub mod gaf;
pub mod hrrp_sim;
pub mod nn;
pub mod threshold_baseline;
