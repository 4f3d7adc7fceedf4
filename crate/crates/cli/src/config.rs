use std::fs;
use std::path::{Path, PathBuf};

use hrrp_core::bench::{ComparisonConfig, Method, ThresholdSweep};
use hrrp_core::hrrp_sim::{default_fleet, linspace, DatasetSpec, RadarConfig, TargetGeometry};
use hrrp_core::nn::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Dataset settings. The SNR comes from [`RunConfig::snr_list`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub geometries: Vec<TargetGeometry>,
    pub theta_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    pub radar: RadarConfig,
    pub split_seed: u64,
    pub split_ratio: [f64; 3],
}

impl Default for DatasetSection {
    fn default() -> Self {
        let spec = DatasetSpec::default();
        Self {
            geometries: default_fleet(),
            theta_grid: linspace(75.0, 105.0, 5),
            phi_grid: linspace(0.0, 60.0, 40),
            radar: spec.radar,
            split_seed: spec.split_seed,
            split_ratio: spec.split_ratio,
        }
    }
}

impl DatasetSection {
    pub fn spec(&self, snr_db: Option<f64>) -> DatasetSpec {
        DatasetSpec {
            geometries: self.geometries.clone(),
            theta_grid: self.theta_grid.clone(),
            phi_grid: self.phi_grid.clone(),
            radar: self.radar,
            snr_db,
            split_seed: self.split_seed,
            split_ratio: self.split_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSection {
    pub eps: f64,
    /// Sampled parameter entries per model (and as many input entries).
    pub samples: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub cnn_len: usize,
    pub resnet_side: usize,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            samples: 60,
            tolerance: 1e-4,
            seed: 0,
            cnn_len: 32,
            resnet_side: 16,
        }
    }
}

/// Everything a command needs; every field has a default, unknown keys are
/// rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// `simulate`, `train` and `eval` use the first entry; `compare` uses all.
    /// `inf` gives noiseless profiles.
    pub snr_list: Vec<f64>,
    /// `train` uses the first seed; `compare` runs every seed.
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Network trained by `train`.
    pub model: Method,
    pub image_side: usize,
    pub dataset: DatasetSection,
    pub train: TrainConfig,
    pub threshold: ThresholdSweep,
    pub gradcheck: GradCheckSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cmp = ComparisonConfig::default();
        Self {
            out_dir: PathBuf::from("runs/default"),
            snr_list: cmp.snr_list,
            seeds: cmp.seeds,
            methods: cmp.methods,
            model: Method::GafResnet,
            image_side: cmp.image_side,
            dataset: DatasetSection::default(),
            train: cmp.train,
            threshold: cmp.threshold,
            gradcheck: GradCheckSection::default(),
        }
    }
}

/// Command-line overrides, applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub snr: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let message = e.into_inner().message().trim().replace('\n', " ");
            CliError::config(if key == "." { "" } else { &key }, message)
        })
    }

    /// Reads `path`, or the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::config("", format!("{}: {e}", p.display())))?;
                Self::parse(&text)?
            }
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(out) = &overrides.out {
            cfg.out_dir = out.clone();
        }
        if let Some(snr) = overrides.snr {
            cfg.snr_list = vec![snr];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |key: &str, msg: String| Err(CliError::config(key, msg));
        if self.snr_list.is_empty() || self.snr_list.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return fail("snr_list", "needs at least one SNR (dB or inf)".into());
        }
        if self.seeds.is_empty() {
            return fail("seeds", "needs at least one seed".into());
        }
        if self.methods.is_empty() {
            return fail("methods", "needs at least one method".into());
        }
        if self.model == Method::Threshold {
            return fail("model", "must be a network (cnn1d or gaf_resnet)".into());
        }
        let d = &self.dataset;
        if d.geometries.is_empty() || d.theta_grid.is_empty() || d.phi_grid.is_empty() {
            return fail("dataset", "geometries, theta_grid and phi_grid must be non-empty".into());
        }
        for (i, g) in d.geometries.iter().enumerate() {
            if let Err(e) = g.validate() {
                return fail(&format!("dataset.geometries[{i}]"), e.to_string());
            }
        }
        let r = d.split_ratio;
        if r.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || r[0] <= 0.0 || r[1] <= 0.0 {
            return fail(
                "dataset.split_ratio",
                format!("{r:?}: entries must be finite and non-negative, train and validation positive"),
            );
        }
        if let Err(e) = d.radar.validate() {
            return fail("dataset.radar", e.to_string());
        }
        if self.image_side < 8 || self.image_side > d.radar.profile_len {
            return fail(
                "image_side",
                format!("{} outside 8..={}", self.image_side, d.radar.profile_len),
            );
        }
        if let Err(e) = self.train.validate() {
            return fail("train", e.to_string());
        }
        let t = &self.threshold;
        if t.k_grid.is_empty() || t.k_grid.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return fail("threshold.k_grid", "needs positive finite values".into());
        }
        if t.noise_window == 0 || 2 * t.noise_window >= d.radar.profile_len {
            return fail("threshold.noise_window", format!("{} must satisfy 0 < 2*window < profile_len", t.noise_window));
        }
        let g = &self.gradcheck;
        if !(g.eps > 0.0 && g.tolerance > 0.0) || g.samples == 0 {
            return fail("gradcheck", "eps, tolerance and samples must be positive".into());
        }
        if g.cnn_len < 8 || g.resnet_side < 8 {
            return fail("gradcheck", "cnn_len and resnet_side must be at least 8".into());
        }
        Ok(())
    }

    pub fn first_snr(&self) -> Option<f64> {
        snr_option(self.snr_list[0])
    }

    pub fn comparison(&self) -> ComparisonConfig {
        ComparisonConfig {
            dataset: self.dataset.spec(None),
            snr_list: self.snr_list.clone(),
            methods: self.methods.clone(),
            seeds: self.seeds.clone(),
            threshold: self.threshold.clone(),
            train: self.train.clone(),
            image_side: self.image_side,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }
}

fn snr_option(snr: f64) -> Option<f64> {
    (snr != f64::INFINITY).then_some(snr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("[train]\nlearning_rat = 0.1\n").unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("learning_rat"), "{err}");
    }

    #[test]
    fn bad_type_names_path() {
        let err = RunConfig::parse("[dataset.radar]\nf_step = \"fast\"\n").unwrap_err();
        assert!(err.to_string().contains("dataset.radar.f_step"), "{err}");
    }

    #[test]
    fn invalid_ratio_names_key() {
        let cfg = RunConfig::parse("[dataset]\nsplit_ratio = [8.0, -1.0, 1.0]\n").unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("key=dataset.split_ratio"), "{err}");
    }

    #[test]
    fn overrides_replace_fields() {
        let o = Overrides {
            seed: Some(9),
            out: Some("elsewhere".into()),
            snr: Some(f64::INFINITY),
        };
        let cfg = RunConfig::load(None, &o).unwrap();
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.out_dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.first_snr(), None);
    }

    #[test]
    fn comparison_matches_library_defaults() {
        assert_eq!(RunConfig::default().comparison(), ComparisonConfig {
            dataset: DatasetSpec { snr_db: None, ..DatasetSpec::default() },
            ..ComparisonConfig::default()
        });
    }
}
