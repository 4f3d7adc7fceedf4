use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Idealized point reflector in the target body frame (x forward, y right, z up).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: [f64; 3],
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetGeometry {
    pub name: String,
    /// Fuselage length `L`, meters.
    pub length: f64,
    /// Wingspan `W`, meters.
    pub wingspan: f64,
    /// Height `H`, meters.
    pub height: f64,
    pub scatterers: Vec<Scatterer>,
}

impl TargetGeometry {
    pub fn new(
        name: impl Into<String>,
        length: f64,
        wingspan: f64,
        height: f64,
        scatterers: Vec<Scatterer>,
    ) -> Result<Self, SimError> {
        let geometry = Self {
            name: name.into(),
            length,
            wingspan,
            height,
            scatterers,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Builds an aircraft-like scatterer layout inside the `L x W x H` box:
    /// nose, tail, both wingtips, fin tip, ventral point, horizontal
    /// stabilizers and `fuselage_points` (clamped to 3..=8) points along the
    /// fuselage.
    ///
    /// Amplitudes are drawn once from `amplitude_seed`: the eight extremity
    /// points reflect weakly (0.08..0.25), fuselage points strongly (0.5..1.0),
    /// so the outermost returns are the first to drown in noise.
    pub fn aircraft(
        name: impl Into<String>,
        length: f64,
        wingspan: f64,
        height: f64,
        fuselage_points: usize,
        amplitude_seed: u64,
    ) -> Result<Self, SimError> {
        const EXTREMITIES: usize = 8;
        let (l, w, h) = (length, wingspan, height);
        let mut rng = ChaCha8Rng::seed_from_u64(amplitude_seed);
        let mut positions = vec![
            [l / 2.0, 0.0, 0.0],
            [-l / 2.0, 0.0, 0.0],
            [-0.1 * l, w / 2.0, 0.0],
            [-0.1 * l, -w / 2.0, 0.0],
            [-0.42 * l, 0.0, h / 2.0],
            [0.2 * l, 0.0, -h / 2.0],
            [-0.45 * l, 0.3 * w, 0.0],
            [-0.45 * l, -0.3 * w, 0.0],
        ];
        let nf = fuselage_points.clamp(3, 8);
        for k in 0..nf {
            let x = l / 2.0 - (k + 1) as f64 * l / (nf + 1) as f64;
            let z = rng.random_range(-0.2..0.2) * h;
            positions.push([x, 0.0, z]);
        }
        let scatterers = positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| {
                let range = if i < EXTREMITIES { 0.08..0.25 } else { 0.5..1.0 };
                Scatterer {
                    position,
                    amplitude: rng.random_range(range),
                }
            })
            .collect();
        Self::new(name, l, w, h, scatterers)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |reason: String| {
            Err(SimError::InvalidGeometry {
                name: self.name.clone(),
                reason,
            })
        };
        let dims = [self.length, self.wingspan, self.height];
        if dims.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return fail(format!("dimensions must be positive, got {dims:?}"));
        }
        if self.scatterers.is_empty() {
            return fail("scatterer list is empty".into());
        }
        let half = [self.length / 2.0, self.wingspan / 2.0, self.height / 2.0];
        for (i, s) in self.scatterers.iter().enumerate() {
            if !(s.amplitude.is_finite() && s.amplitude > 0.0) {
                return fail(format!("scatterer {i} has non-positive amplitude {}", s.amplitude));
            }
            let inside = s
                .position
                .iter()
                .zip(half)
                .all(|(p, h)| p.is_finite() && p.abs() <= h * (1.0 + 1e-12));
            if !inside {
                return fail(format!("scatterer {i} at {:?} lies outside the box", s.position));
            }
        }
        Ok(())
    }
}

/// Six fighter-scale targets with distinct proportions.
pub fn default_fleet() -> Vec<TargetGeometry> {
    const FLEET: [(&str, f64, f64, f64); 6] = [
        ("twin_tail_a", 18.3, 13.6, 4.9),
        ("canard_b", 15.5, 11.1, 4.9),
        ("heavy_c", 19.4, 13.0, 5.6),
        ("light_d", 15.0, 9.9, 5.0),
        ("carrier_e", 17.1, 12.3, 4.7),
        ("compact_f", 14.2, 9.0, 4.4),
    ];
    FLEET
        .iter()
        .enumerate()
        .map(|(i, &(name, l, w, h))| {
            TargetGeometry::aircraft(name, l, w, h, 3 + i % 6, 1000 + i as u64)
                .expect("built-in fleet geometry is valid")
        })
        .collect()
}

/// Radar viewing aspect, stored in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspectAngle {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl AspectAngle {
    pub fn new(theta_deg: f64, phi_deg: f64) -> Self {
        Self { theta_deg, phi_deg }
    }

    fn check_finite(&self) -> Result<(), SimError> {
        if self.theta_deg.is_finite() && self.phi_deg.is_finite() {
            Ok(())
        } else {
            Err(SimError::NonFiniteAngle {
                theta_deg: self.theta_deg,
                phi_deg: self.phi_deg,
            })
        }
    }

    /// Unit line-of-sight vector `(cos phi cos theta, cos phi sin theta, sin phi)`.
    pub fn line_of_sight(&self) -> [f64; 3] {
        let (st, ct) = self.theta_deg.to_radians().sin_cos();
        let (sp, cp) = self.phi_deg.to_radians().sin_cos();
        [cp * ct, cp * st, sp]
    }
}

pub fn radial_length_label(geometry: &TargetGeometry, aspect: AspectAngle) -> Result<f64, SimError> {
    aspect.check_finite()?;
    let theta = aspect.theta_deg.to_radians();
    let phi = aspect.phi_deg.to_radians();
    let d = geometry.length * phi.cos() * theta.cos()
        + geometry.wingspan * phi.cos() * theta.sin()
        + geometry.height * phi.sin();
    if d > 0.0 {
        Ok(d)
    } else {
        Err(SimError::NonPositiveLabel {
            geometry: geometry.name.clone(),
            theta_deg: aspect.theta_deg,
            phi_deg: aspect.phi_deg,
            value: d,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedScatterer {
    /// Signed offset along the line of sight from the body-frame origin, meters.
    pub range_offset: f64,
    pub amplitude: f64,
}

pub fn project_scatterers(geometry: &TargetGeometry, aspect: AspectAngle) -> Vec<ProjectedScatterer> {
    let u = aspect.line_of_sight();
    geometry
        .scatterers
        .iter()
        .map(|s| ProjectedScatterer {
            range_offset: s.position[0] * u[0] + s.position[1] * u[1] + s.position[2] * u[2],
            amplitude: s.amplitude,
        })
        .collect()
}
