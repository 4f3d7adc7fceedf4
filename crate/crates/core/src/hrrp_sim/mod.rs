//! Synthetic HRRP generation from parametric point-scatterer targets.
//!
//! Targets are boxes of size `L x W x H` populated with a deterministic set of
//! point scatterers (nose, tail, wingtips, fin tip and fuselage points). A
//! stepped-frequency radar sweep is simulated per viewing aspect, transformed
//! to the range domain with an inverse DFT and cropped to a fixed number of
//! range bins. Each profile is labelled with the radial length
//!
//! ```text
//! D = L cos(phi) cos(theta) + W cos(phi) sin(theta) + H sin(phi)
//! ```
//!
//! evaluated verbatim, so for `theta > 90` degrees the label is not the
//! physical extent of the box along the line of sight.

mod dataset;
mod geometry;
mod io;
mod noise;
mod synth;

pub use dataset::{generate_dataset, linspace, DatasetSpec, DatasetSplit, Sample, SplitPart};
pub use geometry::{
    default_fleet, project_scatterers, radial_length_label, AspectAngle, ProjectedScatterer,
    Scatterer, TargetGeometry,
};
pub use io::{
    dataset_hash, export_dataset, import_dataset, DatasetMeta, LABELS_FILE, META_FILE, PROFILES_FILE,
};
pub use noise::{add_noise, mean_power};
pub use synth::{synthesize_complex, synthesize_hrrp, RadarConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid geometry `{name}`: {reason}")]
    InvalidGeometry { name: String, reason: String },
    #[error("non-finite aspect angle (theta={theta_deg}, phi={phi_deg})")]
    NonFiniteAngle { theta_deg: f64, phi_deg: f64 },
    #[error("radial length label {value} m is not positive for `{geometry}` at theta={theta_deg} deg, phi={phi_deg} deg")]
    NonPositiveLabel {
        geometry: String,
        theta_deg: f64,
        phi_deg: f64,
        value: f64,
    },
    #[error("invalid radar configuration: {0}")]
    InvalidRadar(String),
    #[error("no scatterers to synthesize")]
    EmptyScene,
    #[error("projected extent {extent} m exceeds the unambiguous range window {window} m")]
    AliasedTarget { extent: f64, window: f64 },
    #[error("scatterer at range offset {offset} m falls outside the {half_window} m half-window of the profile")]
    TargetOutsideProfile { offset: f64, half_window: f64 },
    #[error("invalid dataset request: {0}")]
    InvalidDataset(String),
    #[error("dataset i/o error at {path}: {message}")]
    Io { path: String, message: String },
}

/// One range profile: non-negative amplitudes over range bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrrpSequence {
    pub bins: Vec<f64>,
    /// Meters per range bin.
    pub range_resolution: f64,
    /// `None` for a noiseless profile.
    pub snr_db: Option<f64>,
    pub label_d: Option<f64>,
}

impl HrrpSequence {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.bins.iter().copied().fold(0.0, f64::max)
    }
}
