use std::fs;
use std::path::Path;

use hrrp_core::bench::{evaluate_threshold, export_artifacts, run_comparison, BenchError, Method, MreReport};
use hrrp_core::gaf;
use hrrp_core::hrrp_sim::{export_dataset, generate_dataset, import_dataset, DatasetSplit, SplitPart};
use hrrp_core::nn::{
    build_cnn1d, build_gaf_resnet_toy, grad_check, load_checkpoint, predict, save_checkpoint, InputEncoding, Model,
    Tensor, TrainConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::RunConfig;
use crate::CliError;

const CONFIG_FILE: &str = "config.toml";
const CHECKPOINT_FILE: &str = "model.json";
const TRAIN_REPORT_FILE: &str = "train_report.json";
const MRE_REPORT_FILE: &str = "mre_report.json";
const GAF_INDEX_FILE: &str = "index.csv";

fn prepare_out(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
    write(&dir.join(CONFIG_FILE), cfg.to_toml().as_bytes())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let json = serde_json::to_vec_pretty(value).map_err(CliError::runtime)?;
    write(path, &json)
}

fn load_split(cfg: &RunConfig, dataset: Option<&Path>) -> Result<(DatasetSplit, f64), CliError> {
    match dataset {
        Some(dir) => {
            let (split, meta) = import_dataset(dir).map_err(CliError::runtime)?;
            Ok((split, meta.spec.snr_db.unwrap_or(f64::INFINITY)))
        }
        None => {
            let spec = cfg.dataset.spec(cfg.first_snr());
            let split = generate_dataset(&spec).map_err(CliError::runtime)?;
            Ok((split, spec.snr_db.unwrap_or(f64::INFINITY)))
        }
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.dataset.spec(cfg.first_snr());
    let split = generate_dataset(&spec).map_err(CliError::runtime)?;
    prepare_out(cfg)?;
    let dir = cfg.out_dir.join("dataset");
    let meta = export_dataset(&split, &spec, &dir).map_err(CliError::runtime)?;
    let labels = split.samples_by_id().into_iter().map(|(s, _)| s.label);
    let (lo, hi) = labels.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    println!(
        "samples={} train={} val={} test={} label_min={lo:.4} label_max={hi:.4} hash={} dir={}",
        meta.num_samples,
        split.train.len(),
        split.val.len(),
        split.test.len(),
        meta.dataset_hash,
        dir.display()
    );
    Ok(())
}

fn part_name(part: SplitPart) -> &'static str {
    match part {
        SplitPart::Train => "train",
        SplitPart::Val => "val",
        SplitPart::Test => "test",
    }
}

pub fn encode(dataset: &Path, side: usize, out: &Path) -> Result<(), CliError> {
    let (split, meta) = import_dataset(dataset).map_err(CliError::runtime)?;
    if side == 0 || side > meta.profile_len {
        return Err(CliError::config("side", format!("{side} outside 1..={}", meta.profile_len)));
    }
    let samples = split.samples_by_id();
    let mut images = Vec::with_capacity(samples.len());
    let mut degenerate = Vec::new();
    for (s, _) in &samples {
        match gaf::encode(&s.hrrp, side) {
            Ok(img) => images.push(img),
            Err(_) => degenerate.push(s.id),
        }
    }
    if !degenerate.is_empty() {
        return Err(CliError::runtime(format!("degenerate profiles: sample ids {degenerate:?}")));
    }
    fs::create_dir_all(out).map_err(|e| CliError::runtime(format!("{}: {e}", out.display())))?;
    let mut index = csv::Writer::from_writer(Vec::new());
    let row_err = |e: csv::Error| CliError::runtime(e);
    index.write_record(["sample_id", "split", "D_meters", "file"]).map_err(row_err)?;
    for ((s, part), img) in samples.iter().zip(&images) {
        let file = format!("gaf_{:05}.csv", s.id);
        write(&out.join(&file), img.to_csv_string().as_bytes())?;
        index
            .write_record([s.id.to_string(), part_name(*part).to_string(), s.label.to_string(), file])
            .map_err(row_err)?;
    }
    let bytes = index.into_inner().map_err(|e| CliError::runtime(e.error()))?;
    write(&out.join(GAF_INDEX_FILE), &bytes)?;
    println!("images={} side={side} dir={}", images.len(), out.display());
    Ok(())
}

pub fn train(cfg: &RunConfig, dataset: Option<&Path>) -> Result<(), CliError> {
    let (split, snr) = load_split(cfg, dataset)?;
    let seed = cfg.seeds[0];
    let model_cfg = cfg
        .comparison()
        .model_config(cfg.model, seed)
        .map_err(|e| CliError::config("model", e.to_string()))?
        .ok_or_else(|| CliError::config("model", "must be a network"))?;
    let mut model = Model::<f32>::new(model_cfg).map_err(CliError::runtime)?;
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let report = hrrp_core::nn::train(&mut model, &split, &train_cfg).map_err(CliError::runtime)?;
    let mre = MreReport::new(cfg.model.name(), snr, seed, report.test_predictions.clone()).map_err(CliError::runtime)?;
    prepare_out(cfg)?;
    save_checkpoint(&model, &cfg.out_dir.join(CHECKPOINT_FILE)).map_err(CliError::runtime)?;
    write_json(&cfg.out_dir.join(TRAIN_REPORT_FILE), &report)?;
    println!(
        "method={} snr_db={snr} seed={seed} epochs={} best_epoch={} final_val_loss={:.6} test_mre_percent={:.4} checkpoint={}",
        cfg.model,
        report.train_loss.len(),
        report.final_epoch,
        report.val_loss.last().copied().unwrap_or(f64::NAN),
        mre.mre_percent,
        cfg.out_dir.join(CHECKPOINT_FILE).display()
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig, dataset: Option<&Path>, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let (split, snr) = load_split(cfg, dataset)?;
    let (method, seed, pairs, k) = match checkpoint {
        Some(path) => {
            let mut model: Model<f32> = load_checkpoint(path).map_err(CliError::runtime)?;
            let method = match InputEncoding::for_model(model.config()).map_err(CliError::runtime)? {
                InputEncoding::Profile { .. } => Method::Cnn1d,
                InputEncoding::Gaf { .. } => Method::GafResnet,
            };
            let seed = model.config().init_seed;
            let preds = predict(&mut model, &split.test).map_err(CliError::runtime)?;
            let pairs = preds.into_iter().zip(split.test.iter().map(|s| s.label)).collect();
            (method, seed, pairs, None)
        }
        None => {
            let (k, pairs) = evaluate_threshold(&split, &cfg.threshold).map_err(CliError::runtime)?;
            (Method::Threshold, cfg.seeds[0], pairs, Some(k))
        }
    };
    let report = MreReport::new(method.name(), snr, seed, pairs).map_err(CliError::runtime)?;
    prepare_out(cfg)?;
    write_json(&cfg.out_dir.join(MRE_REPORT_FILE), &report)?;
    let k = k.map(|k| format!(" k={k}")).unwrap_or_default();
    println!(
        "method={method} snr_db={snr}{k} test_samples={} mre_percent={:.6}",
        report.pairs.len(),
        report.mre_percent
    );
    Ok(())
}

pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let ccfg = cfg.comparison();
    let table = run_comparison(&ccfg, &mut |run| {
        let mre = run.report.as_ref().map(|r| format!("{:.4}", r.mre_percent));
        let secs = run.train.as_ref().map(|t| format!(" seconds={:.1}", t.wall_seconds)).unwrap_or_default();
        eprintln!(
            "run method={} snr_db={} seed={} mre_percent={}{secs}",
            run.method,
            run.snr_db,
            run.seed,
            mre.unwrap_or_else(|| format!("error({})", run.error.as_deref().unwrap_or("?")))
        );
    })
    .map_err(|e| match e {
        BenchError::InvalidConfig(m) => CliError::config("-", m),
        other => CliError::runtime(other),
    })?;
    prepare_out(cfg)?;
    export_artifacts(&table, &cfg.out_dir).map_err(CliError::runtime)?;
    for row in table.rows.iter().filter(|r| r.seed.is_none()) {
        let mre = row.mre_percent.map(|m| format!("{m:.4}")).unwrap_or_else(|| "none".into());
        println!("median method={} snr_db={} mre_percent={mre} status={}", row.method, row.snr_db, row.status);
    }
    if let Some(failed) = table.runs.iter().find(|r| r.error.is_some()) {
        return Err(CliError::runtime(format!(
            "{} at snr {} seed {} failed: {}",
            failed.method,
            failed.snr_db,
            failed.seed,
            failed.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(())
}

pub fn gradcheck(cfg: &RunConfig) -> Result<(), CliError> {
    let g = &cfg.gradcheck;
    let models = [
        ("cnn1d", build_cnn1d(g.cnn_len), vec![2, 1, g.cnn_len]),
        ("gaf_resnet", build_gaf_resnet_toy(g.resnet_side), vec![2, 1, g.resnet_side, g.resnet_side]),
    ];
    let mut worst = 0.0f64;
    for (name, model_cfg, shape) in models {
        let model_cfg = model_cfg.map_err(|e| CliError::config("gradcheck", e.to_string()))?;
        let mut model = Model::<f64>::new(model_cfg).map_err(CliError::runtime)?;
        let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let input = Tensor::from_vec(&shape, data).map_err(CliError::runtime)?;
        let report = grad_check(&mut model, &input, g.eps, g.samples, g.seed).map_err(CliError::runtime)?;
        println!(
            "gradcheck model={name} max_rel_error={:.3e} params={} inputs={} kinks_skipped={} worst={}",
            report.max_rel_error, report.params_checked, report.inputs_checked, report.kinks_skipped, report.worst
        );
        worst = worst.max(report.max_rel_error);
    }
    if worst >= g.tolerance {
        return Err(CliError::Verification(format!(
            "max relative error {worst:.3e} >= tolerance {:.1e}",
            g.tolerance
        )));
    }
    Ok(())
}
