use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BenchError, ComparisonConfig, ComparisonTable, Method, REFERENCE_MRE};

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const LOSS_CURVES_FILE: &str = "loss_curves.csv";
pub const PRED_VS_TRUE_FILE: &str = "pred_vs_true.csv";
pub const RUN_META_FILE: &str = "run_meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMre {
    pub method: Method,
    pub snr_db: f64,
    pub mre_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub snr_db: f64,
    pub seed: u64,
    pub mre_percent: Option<f64>,
    pub threshold_k: Option<f64>,
    pub final_epoch: Option<usize>,
    pub wall_seconds: Option<f64>,
    pub error: Option<String>,
}

/// Contents of `run_meta.json`. `config` alone reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub format_version: u32,
    pub config: ComparisonConfig,
    pub dataset_hashes: Vec<(f64, String)>,
    pub reference_mre: Vec<ReferenceMre>,
    pub runs: Vec<RunSummary>,
}

impl RunMeta {
    pub fn from_table(table: &ComparisonTable) -> Self {
        Self {
            format_version: 1,
            config: table.provenance.config.clone(),
            dataset_hashes: table.provenance.dataset_hashes.clone(),
            reference_mre: REFERENCE_MRE
                .iter()
                .map(|&(method, snr_db, mre_percent)| ReferenceMre { method, snr_db, mre_percent })
                .collect(),
            runs: table
                .runs
                .iter()
                .map(|r| RunSummary {
                    method: r.method,
                    snr_db: r.snr_db,
                    seed: r.seed,
                    mre_percent: r.report.as_ref().map(|m| m.mre_percent),
                    threshold_k: r.threshold_k,
                    final_epoch: r.train.as_ref().map(|t| t.final_epoch),
                    wall_seconds: r.train.as_ref().map(|t| t.wall_seconds),
                    error: r.error.clone(),
                })
                .collect(),
        }
    }
}

fn io_err(path: &Path, e: impl ToString) -> BenchError {
    BenchError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes through a temporary sibling and renames it into place.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, BenchError> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `comparison.csv`, `loss_curves.csv`, `pred_vs_true.csv` and
/// `run_meta.json` into `out_dir` (created if missing).
///
/// Runs are labelled `<method>/snr=<snr>/seed=<seed>` in the loss curves and
/// `<method>/seed=<seed>` in the prediction table, which carries the SNR in
/// its own column.
pub fn export_artifacts(table: &ComparisonTable, out_dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    if table.rows.is_empty() {
        return Err(BenchError::InvalidConfig("nothing to export".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let csv_err = |name: &str, e: csv::Error| io_err(&out_dir.join(name), e);

    let comparison = csv_bytes(
        &["method", "snr_db", "seed", "mre_percent", "status"],
        table.rows.iter().map(|r| {
            vec![
                r.method.to_string(),
                r.snr_db.to_string(),
                r.seed.map(|s| s.to_string()).unwrap_or_else(|| "median".into()),
                opt(r.mre_percent),
                r.status.clone(),
            ]
        }),
    )
    .map_err(|e| csv_err(COMPARISON_FILE, e))?;

    let curves = csv_bytes(
        &["method", "epoch", "train_loss", "val_loss"],
        table.runs.iter().filter_map(|r| r.train.as_ref().map(|t| (r, t))).flat_map(|(r, t)| {
            let label = format!("{}/snr={}/seed={}", r.method, r.snr_db, r.seed);
            t.train_loss
                .iter()
                .zip(&t.val_loss)
                .enumerate()
                .map(move |(e, (tl, vl))| vec![label.clone(), (e + 1).to_string(), tl.to_string(), vl.to_string()])
        }),
    )
    .map_err(|e| csv_err(LOSS_CURVES_FILE, e))?;

    let preds = csv_bytes(
        &["method", "snr_db", "predicted_D", "true_D"],
        table.runs.iter().filter_map(|r| r.report.as_ref().map(|m| (r, m))).flat_map(|(r, m)| {
            let label = format!("{}/seed={}", r.method, r.seed);
            m.pairs
                .iter()
                .map(move |(p, t)| vec![label.clone(), r.snr_db.to_string(), p.to_string(), t.to_string()])
        }),
    )
    .map_err(|e| csv_err(PRED_VS_TRUE_FILE, e))?;

    let meta = serde_json::to_vec_pretty(&RunMeta::from_table(table)).map_err(|e| io_err(&out_dir.join(RUN_META_FILE), e))?;

    Ok(vec![
        write_atomic(out_dir, COMPARISON_FILE, &comparison)?,
        write_atomic(out_dir, LOSS_CURVES_FILE, &curves)?,
        write_atomic(out_dir, PRED_VS_TRUE_FILE, &preds)?,
        write_atomic(out_dir, RUN_META_FILE, &meta)?,
    ])
}
