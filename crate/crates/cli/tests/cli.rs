use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hrrp_core::hrrp_sim::{export_dataset, AspectAngle, DatasetSpec, DatasetSplit, HrrpSequence, Sample};

const TINY: &str = r#"
snr_list = [30.0]
seeds = [0]
image_side = 16

[dataset]
theta_grid = [80.0, 90.0]
phi_grid = [10.0, 20.0]
split_ratio = [2.0, 1.0, 1.0]

[[dataset.geometries]]
name = "box"
length = 12.0
wingspan = 8.0
height = 3.0
scatterers = [
    { position = [6.0, 0.0, 0.0], amplitude = 1.0 },
    { position = [-6.0, 0.0, 0.0], amplitude = 0.7 },
    { position = [0.0, 4.0, 1.5], amplitude = 0.5 },
]

[train]
epochs = 2
batch_size = 2
"#;

fn hrrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrrp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {line}"))
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn simulate_tiny(dir: &Path) -> String {
    let cfg = dir.join("sim.toml");
    fs::write(&cfg, TINY).unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = dir.join("run");
    let o = hrrp(&["simulate", "-c", cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("dataset").to_str().unwrap().to_string()
}

#[test]
fn simulate_minimal_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("run");
    let o = hrrp(&["simulate", "-c", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    assert_eq!(field(&line, "samples"), "4");
    assert_eq!(field(&line, "train"), "2");
    let lo: f64 = field(&line, "label_min").parse().unwrap();
    let hi: f64 = field(&line, "label_max").parse().unwrap();
    assert!(0.0 < lo && lo <= hi);
    // the effective configuration is saved next to the outputs
    let saved = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(saved.contains("split_ratio"));
    assert!(out.join("dataset").join("meta.json").exists());
}

#[test]
fn default_simulation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let hashes: Vec<String> = ["a", "b"]
        .iter()
        .map(|name| {
            let o = hrrp(&["simulate", "--out", dir.path().join(name).to_str().unwrap()]);
            assert!(o.status.success(), "{}", stderr(&o));
            let line = stdout(&o);
            assert_eq!(field(&line, "samples"), "1200");
            field(&line, "hash").to_string()
        })
        .collect();
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[0].len(), 64);
}

#[test]
fn config_errors_exit_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[dataset]\nsplit_ratio = [8.0, -1.0, 1.0]\n", "dataset.split_ratio"),
        ("[train]\nlerning_rate = 0.1\n", "lerning_rate"),
        ("[dataset.radar]\nf_step = \"x\"\n", "dataset.radar.f_step"),
        ("image_side = 4\n", "image_side"),
    ];
    for (text, key) in cases {
        let cfg = write_config(dir.path(), text);
        let o = hrrp(&["simulate", "-c", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = stderr(&o);
        assert!(err.starts_with("error kind=config"), "{err}");
        assert!(err.contains(key), "{key} missing from {err}");
        assert_eq!(err.trim_end().lines().count(), 1);
    }
    assert_eq!(hrrp(&["simulate", "--seed", "minus"]).status.code(), Some(2));
    assert_eq!(hrrp(&["simulate", "-c", "/nonexistent/run.toml"]).status.code(), Some(2));
}

#[test]
fn encode_writes_images_and_index() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = simulate_tiny(dir.path());
    let mut bytes = Vec::new();
    for name in ["g1", "g2"] {
        let out = dir.path().join(name);
        let o = hrrp(&["encode", "--dataset", &dataset, "--side", "64", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(field(&stdout(&o), "images"), "4");
        let index = fs::read_to_string(out.join("index.csv")).unwrap();
        assert_eq!(index.lines().count(), 5);
        assert!(index.starts_with("sample_id,split,D_meters,file\n"));
        let img = fs::read_to_string(out.join("gaf_00002.csv")).unwrap();
        assert_eq!(img.lines().count(), 64);
        assert!(img.lines().all(|l| l.split(',').count() == 64));
        let mut all = Vec::new();
        for id in 0..4 {
            all.extend(fs::read(out.join(format!("gaf_{id:05}.csv"))).unwrap());
        }
        all.extend(index.into_bytes());
        bytes.push(all);
    }
    assert_eq!(bytes[0], bytes[1]);
    let o = hrrp(&["encode", "--dataset", &dataset, "--side", "501", "--out", dir.path().join("g3").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn encode_reports_degenerate_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let spec = DatasetSpec {
        theta_grid: vec![90.0],
        phi_grid: vec![0.0, 10.0, 20.0],
        geometries: DatasetSpec::default().geometries[..1].to_vec(),
        snr_db: None,
        ..DatasetSpec::default()
    };
    let sample = |id: usize, bins: Vec<f64>| Sample {
        id,
        geometry: 0,
        aspect: AspectAngle::new(90.0, 10.0 * id as f64),
        label: 10.0,
        hrrp: HrrpSequence {
            bins,
            range_resolution: 0.05,
            snr_db: None,
            label_d: Some(10.0),
        },
    };
    let ramp: Vec<f64> = (0..500).map(|i| i as f64).collect();
    let split = DatasetSplit {
        train: vec![sample(0, ramp.clone()), sample(2, vec![0.5; 500])],
        val: vec![sample(1, ramp)],
        test: vec![],
        split_seed: 0,
    };
    let data = dir.path().join("flat");
    export_dataset(&split, &spec, &data).unwrap();
    let o = hrrp(&[
        "encode",
        "--dataset",
        data.to_str().unwrap(),
        "--side",
        "32",
        "--out",
        dir.path().join("img").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("[2]"), "{}", stderr(&o));
}

#[test]
fn train_then_eval_checkpoint_twice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("model = \"cnn1d\"\n{TINY}"));
    let dataset = simulate_tiny(dir.path());
    let out = dir.path().join("trained");
    let o = hrrp(&["train", "-c", &cfg, "--dataset", &dataset, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "method"), "cnn1d");
    assert!(out.join("model.json").exists() && out.join("train_report.json").exists());
    let ckpt = out.join("model.json");
    let lines: Vec<String> = (0..2)
        .map(|i| {
            let o = hrrp(&[
                "eval",
                "-c",
                &cfg,
                "--dataset",
                &dataset,
                "--checkpoint",
                ckpt.to_str().unwrap(),
                "--out",
                dir.path().join(format!("eval{i}")).to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", stderr(&o));
            stdout(&o)
        })
        .collect();
    assert_eq!(field(&lines[0], "mre_percent"), field(&lines[1], "mre_percent"));
    assert_eq!(
        fs::read(dir.path().join("eval0/mre_report.json")).unwrap(),
        fs::read(dir.path().join("eval1/mre_report.json")).unwrap()
    );
}

#[test]
fn eval_threshold_without_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = hrrp(&["eval", "-c", &cfg, "--out", dir.path().join("e").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    assert_eq!(field(&line, "method"), "threshold");
    assert!(field(&line, "k").parse::<f64>().unwrap() > 0.0);
}

#[test]
fn compare_writes_median_rows_for_both_snrs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &TINY.replace("snr_list = [30.0]", "snr_list = [10.0, 30.0]"));
    let out = dir.path().join("cmp");
    let o = hrrp(&["compare", "-c", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let medians: Vec<&str> = csv.lines().filter(|l| l.contains(",median,")).collect();
    assert_eq!(medians.len(), 6, "{csv}");
    for method in ["threshold", "cnn1d", "gaf_resnet"] {
        for snr in ["10", "30"] {
            assert!(medians.iter().any(|l| l.starts_with(&format!("{method},{snr},median,"))), "{csv}");
        }
    }
    for name in ["loss_curves.csv", "pred_vs_true.csv", "run_meta.json", "config.toml"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("median ")).count(), 6);
}

#[test]
fn gradcheck_default_models_pass() {
    let o = hrrp(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for line in text.lines() {
        assert!(field(line, "max_rel_error").parse::<f64>().unwrap() < 1e-4);
        assert!(field(line, "params").parse::<usize>().unwrap() >= 50);
    }
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn gradcheck_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[gradcheck]\ntolerance = 1e-14\n");
    let o = hrrp(&["gradcheck", "-c", &cfg]);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert!(stderr(&o).starts_with("error kind=verification"));
}
