use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BenchError, MreReport};
use crate::hrrp_sim::{dataset_hash, generate_dataset, DatasetSpec, DatasetSplit};
use crate::nn::{build_cnn1d, build_gaf_resnet_toy, train, Model, ModelConfig, NnError, TrainConfig, TrainReport};
use crate::threshold_baseline::{default_k_grid, estimate_radial_length, ThresholdConfig, ThresholdError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Threshold,
    Cnn1d,
    GafResnet,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Threshold, Method::Cnn1d, Method::GafResnet];

    pub fn name(self) -> &'static str {
        match self {
            Method::Threshold => "threshold",
            Method::Cnn1d => "cnn1d",
            Method::GafResnet => "gaf_resnet",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Published MRE values (percent) by method and SNR, kept as reference
/// metadata next to each run.
pub const REFERENCE_MRE: [(Method, f64, f64); 6] = [
    (Method::Threshold, 10.0, 32.00),
    (Method::Threshold, 30.0, 25.10),
    (Method::Cnn1d, 10.0, 31.92),
    (Method::Cnn1d, 30.0, 10.38),
    (Method::GafResnet, 10.0, 16.17),
    (Method::GafResnet, 30.0, 1.34),
];

/// K values tried on the validation split; the best one is applied to test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSweep {
    pub noise_window: usize,
    pub k_grid: Vec<f64>,
}

impl Default for ThresholdSweep {
    fn default() -> Self {
        Self {
            noise_window: ThresholdConfig::default().noise_window,
            k_grid: default_k_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonConfig {
    /// Dataset template; its `snr_db` is replaced by each entry of `snr_list`.
    pub dataset: DatasetSpec,
    pub snr_list: Vec<f64>,
    pub methods: Vec<Method>,
    /// One training run per seed (model init, shuffling, dropout).
    pub seeds: Vec<u64>,
    pub threshold: ThresholdSweep,
    pub train: TrainConfig,
    pub image_side: usize,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            snr_list: vec![10.0, 30.0],
            methods: Method::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            threshold: ThresholdSweep::default(),
            train: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            image_side: 64,
        }
    }
}

impl ComparisonConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: &str| Err(BenchError::InvalidConfig(m.to_string()));
        if self.methods.is_empty() || self.snr_list.is_empty() || self.seeds.is_empty() {
            return fail("methods, snr_list and seeds must be non-empty");
        }
        if self.snr_list.iter().any(|s| !s.is_finite()) {
            return fail("snr_list entries must be finite");
        }
        if self.threshold.k_grid.is_empty() || self.threshold.k_grid.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return fail("threshold.k_grid must hold positive values");
        }
        if self.image_side < 8 || self.image_side > self.dataset.radar.profile_len {
            return fail("image_side must lie in 8..=profile_len");
        }
        self.train
            .validate()
            .map_err(|e| BenchError::InvalidConfig(e.to_string()))
    }

    pub fn model_config(&self, method: Method, seed: u64) -> Result<Option<ModelConfig>, NnError> {
        let cfg = match method {
            Method::Threshold => return Ok(None),
            Method::Cnn1d => build_cnn1d(self.dataset.radar.profile_len)?,
            Method::GafResnet => build_gaf_resnet_toy(self.image_side)?,
        };
        Ok(Some(ModelConfig { init_seed: seed, ..cfg }))
    }
}

/// One line of the comparison table; `seed == None` marks the median row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: Method,
    pub snr_db: f64,
    pub seed: Option<u64>,
    pub mre_percent: Option<f64>,
    /// `ok`, or the error that prevented this cell.
    pub status: String,
}

/// Everything recorded for one (method, SNR, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub snr_db: f64,
    pub seed: u64,
    pub report: Option<MreReport>,
    pub train: Option<TrainReport>,
    /// Coefficient picked on the validation split (threshold method only).
    pub threshold_k: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: ComparisonConfig,
    /// `(snr_db, sha256)` of every generated dataset.
    pub dataset_hashes: Vec<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// Per-seed rows followed by the median row, grouped by SNR then method.
    pub rows: Vec<ComparisonRow>,
    pub runs: Vec<MethodRun>,
    pub provenance: Provenance,
}

impl ComparisonTable {
    pub fn median(&self, method: Method, snr_db: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.snr_db == snr_db && r.seed.is_none())
            .and_then(|r| r.mre_percent)
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn threshold_predictions(split_part: &[crate::hrrp_sim::Sample], cfg: &ThresholdConfig) -> Result<Vec<(f64, f64)>, ThresholdError> {
    split_part
        .iter()
        .map(|s| match estimate_radial_length(&s.hrrp, cfg) {
            Ok(d) => Ok((d, s.label)),
            Err(ThresholdError::NoTargetDetected { .. }) => Ok((0.0, s.label)),
            Err(e) => Err(e),
        })
        .collect()
}

/// Picks K on the validation split, then returns it with the `(predicted, true)`
/// pairs on the test split. Profiles with no detection predict 0.
pub fn evaluate_threshold(split: &DatasetSplit, sweep: &ThresholdSweep) -> Result<(f64, Vec<(f64, f64)>), String> {
    let mut best: Option<(f64, f64)> = None;
    for &k in &sweep.k_grid {
        let cfg = ThresholdConfig { k, noise_window: sweep.noise_window };
        let pairs = threshold_predictions(&split.val, &cfg).map_err(|e| e.to_string())?;
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mre = super::mean_relative_error(&p, &t).map_err(|e| e.to_string())?;
        if best.is_none_or(|(_, b)| mre < b) {
            best = Some((k, mre));
        }
    }
    let (k, _) = best.ok_or("empty K grid")?;
    let cfg = ThresholdConfig { k, noise_window: sweep.noise_window };
    let pairs = threshold_predictions(&split.test, &cfg).map_err(|e| e.to_string())?;
    Ok((k, pairs))
}

fn run_network(cfg: &ComparisonConfig, method: Method, seed: u64, split: &DatasetSplit) -> Result<TrainReport, NnError> {
    let model_cfg = cfg.model_config(method, seed)?.expect("network method");
    let mut model = Model::<f32>::new(model_cfg)?;
    let train_cfg = TrainConfig { seed, ..cfg.train.clone() };
    train(&mut model, split, &train_cfg)
}

/// Runs every requested (SNR, method, seed) cell. A failing cell becomes an
/// error row; the remaining cells still run. `progress` sees each run as it
/// completes.
pub fn run_comparison(
    cfg: &ComparisonConfig,
    progress: &mut dyn FnMut(&MethodRun),
) -> Result<ComparisonTable, BenchError> {
    cfg.validate()?;
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods.dedup();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut dataset_hashes = Vec::new();
    for &snr in &cfg.snr_list {
        let spec = DatasetSpec {
            snr_db: Some(snr),
            ..cfg.dataset.clone()
        };
        let split = generate_dataset(&spec).map_err(|e| e.to_string());
        if let Ok(split) = &split {
            dataset_hashes.push((snr, dataset_hash(split)));
        }
        for &method in &methods {
            let mut cell_runs = Vec::new();
            let threshold = match (&split, method) {
                (Ok(split), Method::Threshold) => Some(evaluate_threshold(split, &cfg.threshold)),
                _ => None,
            };
            for &seed in &cfg.seeds {
                let mut run = MethodRun {
                    method,
                    snr_db: snr,
                    seed,
                    report: None,
                    train: None,
                    threshold_k: None,
                    error: None,
                };
                let pairs = match (&split, &threshold) {
                    (Err(e), _) => Err(e.clone()),
                    (Ok(_), Some(result)) => result.clone().map(|(k, pairs)| {
                        run.threshold_k = Some(k);
                        pairs
                    }),
                    (Ok(split), None) => run_network(cfg, method, seed, split)
                        .map(|report| {
                            let pairs = report.test_predictions.clone();
                            run.train = Some(report);
                            pairs
                        })
                        .map_err(|e| e.to_string()),
                };
                match pairs.and_then(|p| MreReport::new(method.name(), snr, seed, p).map_err(|e| e.to_string())) {
                    Ok(report) => run.report = Some(report),
                    Err(e) => run.error = Some(e),
                }
                progress(&run);
                cell_runs.push(run);
            }
            for run in &cell_runs {
                rows.push(ComparisonRow {
                    method,
                    snr_db: snr,
                    seed: Some(run.seed),
                    mre_percent: run.report.as_ref().map(|r| r.mre_percent),
                    status: run.error.clone().unwrap_or_else(|| "ok".into()),
                });
            }
            let mut ok: Vec<f64> = cell_runs.iter().filter_map(|r| r.report.as_ref().map(|r| r.mre_percent)).collect();
            let med = median(&mut ok);
            rows.push(ComparisonRow {
                method,
                snr_db: snr,
                seed: None,
                mre_percent: med,
                status: if med.is_some() { "ok".into() } else { "error: no successful seed".into() },
            });
            runs.extend(cell_runs);
        }
    }
    Ok(ComparisonTable {
        rows,
        runs,
        provenance: Provenance {
            config: cfg.clone(),
            dataset_hashes,
        },
    })
}
