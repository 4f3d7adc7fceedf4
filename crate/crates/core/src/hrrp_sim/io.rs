//! Dataset directory format.
//!
//! ```text
//! meta.json      DatasetMeta: generating spec, split membership, hash
//! profiles.f64   row-major little-endian f64, one row of profile_len bins per sample id
//! labels.csv     sample_id,D_meters,theta_deg,phi_deg,snr_db
//! ```
//!
//! `snr_db` is written as `inf` for noiseless profiles.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AspectAngle, DatasetSpec, DatasetSplit, HrrpSequence, Sample, SimError, SplitPart};

pub const META_FILE: &str = "meta.json";
pub const PROFILES_FILE: &str = "profiles.f64";
pub const LABELS_FILE: &str = "labels.csv";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub spec: DatasetSpec,
    pub num_samples: usize,
    pub profile_len: usize,
    pub range_resolution: f64,
    pub train_ids: Vec<usize>,
    pub val_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    /// SHA-256 of the profile and label files, hex.
    pub dataset_hash: String,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn profile_bytes(ordered: &[(&Sample, SplitPart)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(ordered.len() * ordered.first().map_or(0, |(s, _)| s.hrrp.len()) * 8);
    for (s, _) in ordered {
        for b in &s.hrrp.bins {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

fn label_bytes(ordered: &[(&Sample, SplitPart)]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sample_id", "D_meters", "theta_deg", "phi_deg", "snr_db"])?;
    for (s, _) in ordered {
        let snr = s.hrrp.snr_db.unwrap_or(f64::INFINITY);
        w.write_record([
            s.id.to_string(),
            s.label.to_string(),
            s.aspect.theta_deg.to_string(),
            s.aspect.phi_deg.to_string(),
            snr.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn hash_hex(profiles: &[u8], labels: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(profiles);
    h.update(labels);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a dataset, identical to the one stored by [`export_dataset`].
pub fn dataset_hash(split: &DatasetSplit) -> String {
    let ordered = split.samples_by_id();
    let labels = label_bytes(&ordered).expect("in-memory csv write");
    hash_hex(&profile_bytes(&ordered), &labels)
}

pub fn export_dataset(split: &DatasetSplit, spec: &DatasetSpec, dir: &Path) -> Result<DatasetMeta, SimError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let ordered = split.samples_by_id();
    let profiles = profile_bytes(&ordered);
    let labels = label_bytes(&ordered).map_err(|e| io_err(dir, e))?;
    let ids = |part: SplitPart| -> Vec<usize> {
        let mut v: Vec<usize> = split.part(part).iter().map(|s| s.id).collect();
        v.sort_unstable();
        v
    };
    let meta = DatasetMeta {
        format_version: FORMAT_VERSION,
        spec: spec.clone(),
        num_samples: ordered.len(),
        profile_len: spec.radar.profile_len,
        range_resolution: spec.radar.bin_spacing(),
        train_ids: ids(SplitPart::Train),
        val_ids: ids(SplitPart::Val),
        test_ids: ids(SplitPart::Test),
        dataset_hash: hash_hex(&profiles, &labels),
    };
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))
    };
    write(PROFILES_FILE, &profiles)?;
    write(LABELS_FILE, &labels)?;
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| io_err(&dir.join(META_FILE), e))?;
    write(META_FILE, &json)?;
    Ok(meta)
}

pub fn import_dataset(dir: &Path) -> Result<(DatasetSplit, DatasetMeta), SimError> {
    let meta_path = dir.join(META_FILE);
    let meta_text = fs::read(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: DatasetMeta = serde_json::from_slice(&meta_text).map_err(|e| io_err(&meta_path, e))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(io_err(&meta_path, format!("unsupported format_version {}", meta.format_version)));
    }

    let prof_path = dir.join(PROFILES_FILE);
    let profiles = fs::read(&prof_path).map_err(|e| io_err(&prof_path, e))?;
    if profiles.len() != meta.num_samples * meta.profile_len * 8 {
        return Err(io_err(
            &prof_path,
            format!(
                "expected {} x {} f64 values, found {} bytes",
                meta.num_samples,
                meta.profile_len,
                profiles.len()
            ),
        ));
    }
    let lab_path = dir.join(LABELS_FILE);
    let labels = fs::read(&lab_path).map_err(|e| io_err(&lab_path, e))?;
    let hash = hash_hex(&profiles, &labels);
    if hash != meta.dataset_hash {
        return Err(io_err(dir, format!("hash mismatch: meta {} vs content {hash}", meta.dataset_hash)));
    }

    let per_geometry = meta.spec.theta_grid.len() * meta.spec.phi_grid.len();
    let mut rdr = csv::Reader::from_reader(labels.as_slice());
    let mut samples = Vec::with_capacity(meta.num_samples);
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| io_err(&lab_path, e))?;
        let field = |i: usize| -> Result<f64, SimError> {
            record
                .get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| io_err(&lab_path, format!("row {row}: bad column {i}")))
        };
        let id: usize = record
            .get(0)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| io_err(&lab_path, format!("row {row}: bad sample_id")))?;
        if id != row {
            return Err(io_err(&lab_path, format!("row {row} has sample_id {id}")));
        }
        let label = field(1)?;
        let snr = field(4)?;
        let bins = profiles[id * meta.profile_len * 8..(id + 1) * meta.profile_len * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        samples.push(Sample {
            id,
            geometry: id / per_geometry.max(1),
            aspect: AspectAngle::new(field(2)?, field(3)?),
            label,
            hrrp: HrrpSequence {
                bins,
                range_resolution: meta.range_resolution,
                snr_db: snr.is_finite().then_some(snr),
                label_d: Some(label),
            },
        });
    }
    if samples.len() != meta.num_samples {
        return Err(io_err(&lab_path, format!("{} rows, expected {}", samples.len(), meta.num_samples)));
    }

    let mut part_of: HashMap<usize, SplitPart> = HashMap::new();
    for (ids, part) in [
        (&meta.train_ids, SplitPart::Train),
        (&meta.val_ids, SplitPart::Val),
        (&meta.test_ids, SplitPart::Test),
    ] {
        for &id in ids {
            if id >= meta.num_samples || part_of.insert(id, part).is_some() {
                return Err(io_err(&meta_path, format!("sample {id} listed twice or out of range")));
            }
        }
    }
    if part_of.len() != meta.num_samples {
        return Err(io_err(&meta_path, "split lists do not cover every sample"));
    }

    let mut split = DatasetSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        split_seed: meta.spec.split_seed,
    };
    for s in samples {
        match part_of[&s.id] {
            SplitPart::Train => split.train.push(s),
            SplitPart::Val => split.val.push(s),
            SplitPart::Test => split.test.push(s),
        }
    }
    Ok((split, meta))
}
