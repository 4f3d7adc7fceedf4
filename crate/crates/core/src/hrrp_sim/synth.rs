use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{HrrpSequence, ProjectedScatterer, SimError, SPEED_OF_LIGHT};

/// Stepped-frequency radar sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub f_start: f64,
    pub f_stop: f64,
    pub f_step: f64,
    /// Number of range bins kept after the inverse transform.
    pub profile_len: usize,
}

impl Default for RadarConfig {
    /// X-band, 8.5–11.5 GHz in 5 MHz steps, 500 output bins.
    fn default() -> Self {
        Self {
            f_start: 8.5e9,
            f_stop: 11.5e9,
            f_step: 5e6,
            profile_len: 500,
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidRadar(m));
        if !(self.f_start.is_finite() && self.f_stop.is_finite() && self.f_step.is_finite()) {
            return bad("frequencies must be finite".into());
        }
        if self.f_start <= 0.0 || self.f_stop <= self.f_start {
            return bad(format!(
                "need 0 < f_start < f_stop, got {} .. {}",
                self.f_start, self.f_stop
            ));
        }
        if self.f_step <= 0.0 {
            return bad(format!("f_step must be positive, got {}", self.f_step));
        }
        if self.profile_len < 2 {
            return bad(format!("profile_len must be at least 2, got {}", self.profile_len));
        }
        let n = self.num_frequencies();
        if n < self.profile_len {
            return bad(format!(
                "{n} frequency samples cannot fill {} range bins",
                self.profile_len
            ));
        }
        Ok(())
    }

    /// `floor((f_stop - f_start) / f_step) + 1`, tolerant of the rounding in
    /// ratios such as 3e9 / 5e6.
    pub fn num_frequencies(&self) -> usize {
        let ratio = (self.f_stop - self.f_start) / self.f_step;
        (ratio + 1e-9).floor() as usize + 1
    }

    pub fn bandwidth(&self) -> f64 {
        self.f_stop - self.f_start
    }

    /// Nominal range resolution `c / (2 B)`.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth())
    }

    /// Range spacing of the inverse DFT output, `c / (2 N f_step)`.
    ///
    /// This is what one output bin spans and what `HrrpSequence` carries.
    pub fn bin_spacing(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.num_frequencies() as f64 * self.f_step)
    }

    /// Unambiguous range window `c / (2 f_step)`.
    pub fn unambiguous_range(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.f_step)
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_frequencies()).map(move |k| self.f_start + k as f64 * self.f_step)
    }
}

fn check_scene(projected: &[ProjectedScatterer], radar: &RadarConfig) -> Result<(), SimError> {
    radar.validate()?;
    if projected.is_empty() {
        return Err(SimError::EmptyScene);
    }
    let (lo, hi) = projected.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.range_offset), hi.max(s.range_offset))
    });
    let window = radar.unambiguous_range();
    if hi - lo > window {
        return Err(SimError::AliasedTarget {
            extent: hi - lo,
            window,
        });
    }
    let half_window = radar.profile_len as f64 / 2.0 * radar.bin_spacing();
    for s in projected {
        if s.range_offset.abs() >= half_window {
            return Err(SimError::TargetOutsideProfile {
                offset: s.range_offset,
                half_window,
            });
        }
    }
    Ok(())
}

/// Complex range profile before magnitude detection.
///
/// Builds `S(f_k) = sum_m a_m exp(-j 4 pi f_k r_m / c)`, applies a
/// `1/N`-normalized inverse DFT and circularly shifts so that range offset 0
/// lands on bin `profile_len / 2`, keeping the central `profile_len` bins.
/// A scatterer at offset `r` peaks at bin `profile_len / 2 + r / bin_spacing`.
pub fn synthesize_complex(
    projected: &[ProjectedScatterer],
    radar: &RadarConfig,
) -> Result<Vec<Complex64>, SimError> {
    check_scene(projected, radar)?;
    let n = radar.num_frequencies();
    let mut spectrum: Vec<Complex64> = radar
        .frequencies()
        .map(|f| {
            projected
                .iter()
                .map(|s| Complex64::from_polar(s.amplitude, -4.0 * PI * f * s.range_offset / SPEED_OF_LIGHT))
                .sum()
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(n).process(&mut spectrum);
    let scale = 1.0 / n as f64;

    let half = radar.profile_len / 2;
    Ok((0..radar.profile_len)
        .map(|i| spectrum[(i + n - half) % n] * scale)
        .collect())
}

pub fn synthesize_hrrp(projected: &[ProjectedScatterer], radar: &RadarConfig) -> Result<HrrpSequence, SimError> {
    let profile = synthesize_complex(projected, radar)?;
    Ok(HrrpSequence {
        bins: profile.iter().map(|z| z.norm()).collect(),
        range_resolution: radar.bin_spacing(),
        snr_db: None,
        label_d: None,
    })
}
