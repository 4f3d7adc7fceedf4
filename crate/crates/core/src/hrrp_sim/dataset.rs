use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    add_noise, default_fleet, project_scatterers, radial_length_label, synthesize_hrrp, AspectAngle,
    HrrpSequence, RadarConfig, SimError, TargetGeometry,
};

/// Everything needed to regenerate a dataset bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub geometries: Vec<TargetGeometry>,
    pub theta_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    pub radar: RadarConfig,
    /// `None` produces noiseless profiles.
    pub snr_db: Option<f64>,
    pub split_seed: u64,
    /// Relative train/validation/test sizes.
    pub split_ratio: [f64; 3],
}

impl Default for DatasetSpec {
    /// Desk-scale grid: 6 targets x 5 theta values over 75..105 deg x 40 phi
    /// values over 0..60 deg, 1200 samples at 30 dB.
    fn default() -> Self {
        Self {
            geometries: default_fleet(),
            theta_grid: linspace(75.0, 105.0, 5),
            phi_grid: linspace(0.0, 60.0, 40),
            radar: RadarConfig::default(),
            snr_db: Some(30.0),
            split_seed: 7,
            split_ratio: [8.0, 1.0, 1.0],
        }
    }
}

impl DatasetSpec {
    pub fn num_samples(&self) -> usize {
        self.geometries.len() * self.theta_grid.len() * self.phi_grid.len()
    }

    /// Grid of the paper-scale experiment (theta 75..105 step 3, phi 0..60
    /// step 0.05). About 80k samples; not the default.
    pub fn paper_scale() -> Self {
        Self {
            theta_grid: (0..=10).map(|i| 75.0 + 3.0 * i as f64).collect(),
            phi_grid: (0..=1200).map(|i| 0.05 * i as f64).collect(),
            ..Self::default()
        }
    }
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Position in generation order (geometry-major, then theta, then phi).
    pub id: usize,
    pub geometry: usize,
    pub aspect: AspectAngle,
    /// Radial length label `D`, meters.
    pub label: f64,
    pub hrrp: HrrpSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitPart {
    Train,
    Val,
    Test,
}

/// Disjoint 8:1:1 train/validation/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    pub split_seed: u64,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn part(&self, part: SplitPart) -> &[Sample] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Val => &self.val,
            SplitPart::Test => &self.test,
        }
    }

    /// All samples ordered by id.
    pub fn samples_by_id(&self) -> Vec<(&Sample, SplitPart)> {
        let mut all: Vec<_> = [SplitPart::Train, SplitPart::Val, SplitPart::Test]
            .into_iter()
            .flat_map(|p| self.part(p).iter().map(move |s| (s, p)))
            .collect();
        all.sort_by_key(|(s, _)| s.id);
        all
    }

    /// Partitions `samples` after a seeded shuffle; sizes are
    /// `round(0.8 n)`, `round(0.1 n)` and the remainder.
    pub fn partition(samples: Vec<Sample>, split_seed: u64) -> Self {
        Self::partition_with_ratio(samples, split_seed, [8.0, 1.0, 1.0])
    }

    /// Shuffles with `split_seed` and cuts by `ratio`; sizes are rounded
    /// and the test part takes the remainder.
    pub fn partition_with_ratio(mut samples: Vec<Sample>, split_seed: u64, ratio: [f64; 3]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(split_seed);
        samples.shuffle(&mut rng);
        let n = samples.len();
        let total: f64 = ratio.iter().sum();
        let n_train = ((ratio[0] / total * n as f64).round() as usize).min(n);
        let n_val = ((ratio[1] / total * n as f64).round() as usize).min(n - n_train);
        let test = samples.split_off(n_train + n_val);
        let val = samples.split_off(n_train);
        Self {
            train: samples,
            val,
            test,
            split_seed,
        }
    }
}

/// Per-sample noise seed; SplitMix64 finalizer over (split seed, snr, id).
pub(crate) fn noise_seed(split_seed: u64, snr_db: f64, id: usize) -> u64 {
    let mut z = split_seed
        ^ snr_db.to_bits().rotate_left(17)
        ^ (id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One labelled profile per (geometry, theta, phi), then a shuffled split by
/// `split_ratio`.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<DatasetSplit, SimError> {
    if spec.geometries.is_empty() || spec.theta_grid.is_empty() || spec.phi_grid.is_empty() {
        return Err(SimError::InvalidDataset(
            "geometry list and angle grids must be non-empty".into(),
        ));
    }
    if let Some(snr) = spec.snr_db {
        if snr.is_nan() {
            return Err(SimError::InvalidDataset("snr_db is NaN".into()));
        }
    }
    let r = spec.split_ratio;
    if r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || r[0] <= 0.0 || r[1] <= 0.0 {
        return Err(SimError::InvalidDataset(format!(
            "split_ratio {r:?} needs finite non-negative entries with positive train and validation parts"
        )));
    }
    spec.radar.validate()?;
    let mut samples = Vec::with_capacity(spec.num_samples());
    for (gi, geometry) in spec.geometries.iter().enumerate() {
        geometry.validate()?;
        for &theta in &spec.theta_grid {
            for &phi in &spec.phi_grid {
                let aspect = AspectAngle::new(theta, phi);
                let label = radial_length_label(geometry, aspect)?;
                let projected = project_scatterers(geometry, aspect);
                let id = samples.len();
                let mut hrrp = synthesize_hrrp(&projected, &spec.radar)?;
                if let Some(snr) = spec.snr_db {
                    hrrp = add_noise(&hrrp, snr, noise_seed(spec.split_seed, snr, id));
                }
                hrrp.label_d = Some(label);
                samples.push(Sample {
                    id,
                    geometry: gi,
                    aspect,
                    label,
                    hrrp,
                });
            }
        }
    }
    Ok(DatasetSplit::partition_with_ratio(samples, spec.split_seed, spec.split_ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> DatasetSpec {
        DatasetSpec {
            geometries: default_fleet()[..2].to_vec(),
            theta_grid: vec![80.0, 90.0],
            phi_grid: linspace(0.0, 40.0, 5),
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn default_grid_sizes() {
        let spec = DatasetSpec::default();
        assert_eq!(spec.num_samples(), 1200);
        let ps = DatasetSpec::paper_scale();
        assert_eq!(ps.theta_grid.len(), 11);
        assert_eq!(ps.phi_grid.len(), 1201);
    }

    #[test]
    fn partition_ratio_and_coverage() {
        let spec = tiny_spec();
        let split = generate_dataset(&spec).unwrap();
        assert_eq!(split.len(), 20);
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (16, 2, 2));
        let mut ids: Vec<usize> = split.samples_by_id().iter().map(|(s, _)| s.id).collect();
        ids.dedup();
        assert_eq!(ids, (0..20).collect::<Vec<_>>());
        for (s, _) in split.samples_by_id() {
            assert!(s.label.is_finite() && s.label > 0.0);
            assert_eq!(s.hrrp.label_d, Some(s.label));
            assert_eq!(s.hrrp.len(), 500);
        }
    }

    #[test]
    fn partition_of_1200_is_960_120_120() {
        let samples: Vec<Sample> = (0..1200)
            .map(|id| Sample {
                id,
                geometry: 0,
                aspect: AspectAngle::new(0.0, 0.0),
                label: 1.0,
                hrrp: HrrpSequence {
                    bins: vec![],
                    range_resolution: 0.05,
                    snr_db: None,
                    label_d: None,
                },
            })
            .collect();
        let split = DatasetSplit::partition(samples, 11);
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (960, 120, 120));
    }

    #[test]
    fn same_seed_same_partition() {
        let spec = tiny_spec();
        let a = generate_dataset(&spec).unwrap();
        let b = generate_dataset(&spec).unwrap();
        assert_eq!(a, b);
        let other = generate_dataset(&DatasetSpec {
            split_seed: 8,
            ..spec
        })
        .unwrap();
        assert_ne!(
            a.train.iter().map(|s| s.id).collect::<Vec<_>>(),
            other.train.iter().map(|s| s.id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn custom_and_invalid_ratio() {
        let split = generate_dataset(&DatasetSpec {
            split_ratio: [2.0, 1.0, 1.0],
            ..tiny_spec()
        })
        .unwrap();
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (10, 5, 5));
        for bad in [[8.0, -1.0, 1.0], [0.0, 1.0, 1.0], [8.0, 1.0, f64::NAN]] {
            let spec = DatasetSpec { split_ratio: bad, ..tiny_spec() };
            assert!(matches!(generate_dataset(&spec), Err(SimError::InvalidDataset(_))));
        }
    }

    #[test]
    fn incompatible_grid_propagates_label_error() {
        let spec = DatasetSpec {
            theta_grid: vec![170.0],
            ..tiny_spec()
        };
        assert!(matches!(generate_dataset(&spec), Err(SimError::NonPositiveLabel { .. })));
    }

    #[test]
    fn default_grid_labels_positive() {
        let spec = DatasetSpec::default();
        for g in &spec.geometries {
            for &t in &spec.theta_grid {
                for &p in &spec.phi_grid {
                    assert!(radial_length_label(g, AspectAngle::new(t, p)).unwrap() > 0.0);
                }
            }
        }
    }
}
