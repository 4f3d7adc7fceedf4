//! Detection-threshold radial length estimator.
//!
//! The noise level is the mean amplitude of the `noise_window` bins at each
//! end of the profile (synthesis centers the target, so the edges are
//! target-free). Every bin strictly above `K * noise` counts as target; the
//! length is the distance between the first and the last such bin.
//!
//! On noiseless profiles the edge bins hold only rounding error, so the noise
//! level never drops below [`RELATIVE_NOISE_FLOOR`] times the peak amplitude.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hrrp_sim::HrrpSequence;

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("invalid threshold config: {0}")]
    InvalidConfig(String),
    #[error("no bin exceeds the threshold {threshold}")]
    NoTargetDetected { threshold: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Threshold coefficient `K` applied to the noise level.
    pub k: f64,
    /// Bins taken from each profile edge for the noise estimate.
    pub noise_window: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { k: 5.0, noise_window: 25 }
    }
}

impl ThresholdConfig {
    pub fn validate(&self, profile_len: usize) -> Result<(), ThresholdError> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(ThresholdError::InvalidConfig(format!("K must be positive, got {}", self.k)));
        }
        check_window(self.noise_window, profile_len)
    }
}

/// K values swept by the benchmark when picking the best threshold.
pub fn default_k_grid() -> Vec<f64> {
    vec![1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 15.0, 20.0]
}

fn check_window(window: usize, len: usize) -> Result<(), ThresholdError> {
    if window == 0 || 2 * window >= len {
        return Err(ThresholdError::InvalidConfig(format!(
            "noise window {window} must satisfy 0 < 2*window < profile length {len}"
        )));
    }
    Ok(())
}

pub fn estimate_noise_level(hrrp: &HrrpSequence, noise_window: usize) -> Result<f64, ThresholdError> {
    let n = hrrp.len();
    check_window(noise_window, n)?;
    let head = &hrrp.bins[..noise_window];
    let tail = &hrrp.bins[n - noise_window..];
    Ok(head.iter().chain(tail).sum::<f64>() / (2 * noise_window) as f64)
}

/// Lower bound on the noise level, relative to the largest bin.
pub const RELATIVE_NOISE_FLOOR: f64 = 1e-12;

pub fn estimate_radial_length(hrrp: &HrrpSequence, cfg: &ThresholdConfig) -> Result<f64, ThresholdError> {
    cfg.validate(hrrp.len())?;
    let noise = estimate_noise_level(hrrp, cfg.noise_window)?.max(RELATIVE_NOISE_FLOOR * hrrp.max_amplitude());
    let threshold = cfg.k * noise;
    let first = hrrp.bins.iter().position(|&b| b > threshold);
    let last = hrrp.bins.iter().rposition(|&b| b > threshold);
    match (first, last) {
        (Some(i), Some(j)) => Ok((j - i) as f64 * hrrp.range_resolution),
        _ => Err(ThresholdError::NoTargetDetected { threshold }),
    }
}
