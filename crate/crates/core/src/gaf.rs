//! Gramian Angular (summation) Field encoding of 1D profiles.
//!
//! `encode` runs `paa_downsample -> normalize -> to_polar -> gaf_matrix`.
//!
//! The min-max rescale is `((x - max) + (x - min)) / (max - min)`, which maps
//! the minimum to -1 and the maximum to +1. The variant
//! `((x - min) + (x + max)) / (min + max)` that circulates in some write-ups does
//! not land in [-1, 1] and is not used.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::hrrp_sim::HrrpSequence;

/// Inputs within this distance outside [-1, 1] are clamped before `acos`.
pub const ARCCOS_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GafError {
    #[error("sequence has no spread (max == min == {0}); nothing to encode")]
    DegenerateSequence(f64),
    #[error("sequence of length {0} is too short; need at least 2 samples")]
    TooShort(usize),
    #[error("sequence contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("normalized value {value} at index {index} is outside [-1, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("cannot downsample {len} samples to {target}")]
    BadTargetLength { len: usize, target: usize },
    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSequence {
    pub values: Vec<f64>,
    pub source_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarSequence {
    /// `acos(x_hat_i)`, in [0, pi].
    pub angles: Vec<f64>,
    /// `i / N` for `i = 1..=N`. Not consumed by the summation field.
    pub radii: Vec<f64>,
}

/// Square, symmetric matrix with entries in [-1, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GafImage {
    pub side: usize,
    pub matrix: Vec<f64>,
}

impl GafImage {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.side + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.side..(i + 1) * self.side]
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.matrix.len() * 20);
        for i in 0..self.side {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{v}").expect("write to String");
            }
            out.push('\n');
        }
        out
    }

    /// Binary PGM (P5), linear map [-1, 1] -> [0, 255].
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.side, self.side).into_bytes();
        out.extend(
            self.matrix
                .iter()
                .map(|v| ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8),
        );
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), GafError> {
        write_file(path, self.to_csv_string().as_bytes())
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), GafError> {
        write_file(path, &self.to_pgm_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), GafError> {
    fs::write(path, bytes).map_err(|e| GafError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn normalize(x: &[f64]) -> Result<NormalizedSequence, GafError> {
    if x.len() < 2 {
        return Err(GafError::TooShort(x.len()));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(GafError::NonFinite(i));
    }
    let (min, max) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if max <= min {
        return Err(GafError::DegenerateSequence(min));
    }
    let range = max - min;
    let values = x
        .iter()
        .map(|&v| (((v - max) + (v - min)) / range).clamp(-1.0, 1.0))
        .collect();
    Ok(NormalizedSequence {
        values,
        source_len: x.len(),
    })
}

pub fn to_polar(x_hat: &NormalizedSequence) -> Result<PolarSequence, GafError> {
    let n = x_hat.values.len();
    let angles = x_hat
        .values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value.abs() > 1.0 + ARCCOS_CLAMP_TOL || value.is_nan() {
                Err(GafError::OutOfRange { index, value })
            } else {
                Ok(value.clamp(-1.0, 1.0).acos())
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let radii = (1..=n).map(|i| i as f64 / n as f64).collect();
    Ok(PolarSequence { angles, radii })
}

/// `G[i][j] = cos(phi_i + phi_j)`.
pub fn gaf_matrix(polar: &PolarSequence) -> GafImage {
    let side = polar.angles.len();
    let mut matrix = vec![0.0; side * side];
    for (i, &a) in polar.angles.iter().enumerate() {
        for (j, &b) in polar.angles.iter().enumerate() {
            matrix[i * side + j] = (a + b).cos();
        }
    }
    GafImage { side, matrix }
}

/// Piecewise aggregate approximation: mean over `target_len` contiguous
/// segments, segment `k` covering `[k n / m, (k + 1) n / m)`.
pub fn paa_downsample(x: &[f64], target_len: usize) -> Result<Vec<f64>, GafError> {
    let n = x.len();
    if target_len < 2 || target_len > n {
        return Err(GafError::BadTargetLength { len: n, target: target_len });
    }
    if target_len == n {
        return Ok(x.to_vec());
    }
    Ok((0..target_len)
        .map(|k| {
            let lo = k * n / target_len;
            let hi = (k + 1) * n / target_len;
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect())
}

pub fn encode_sequence(x: &[f64], image_side: usize) -> Result<GafImage, GafError> {
    let reduced = paa_downsample(x, image_side)?;
    let polar = to_polar(&normalize(&reduced)?)?;
    Ok(gaf_matrix(&polar))
}

pub fn encode(hrrp: &HrrpSequence, image_side: usize) -> Result<GafImage, GafError> {
    encode_sequence(&hrrp.bins, image_side)
}
