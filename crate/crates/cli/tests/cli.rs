use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

const SAMPLE_HEADER: &str = "index,age_group,cement,slag,fly_ash,water,superplasticizer,coarse_aggregate,fine_aggregate,\
cond_strength,cond_gwp,cond_ap,cond_cbw,z0,z1,predicted_strength,predicted_gwp,predicted_ap,predicted_cbw,\
lca_gwp,lca_ap,lca_cbw,out_of_domain";

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).to_string_lossy().into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&p);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn mixgen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixgen")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = mixgen(args);
    assert!(out.status.success(), "mixgen {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> (String, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header = r.headers().unwrap().iter().collect::<Vec<_>>().join(",");
    (header, r.records().map(Result::unwrap).collect())
}

/// A quickly trained model shared by every test in this file.
fn model() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let out = scratch("model");
        ok(&[
            "train", "--data", &data("concrete.csv"), "--epd", &data("coefficients-v1.txt"),
            "--epochs", "30", "--predictor-epochs", "60", "--seed", "4", "--out", s(&out),
        ]);
        out
    })
}

fn generate(name: &str, extra: &[&str]) -> PathBuf {
    let out = scratch(name);
    let mut args = vec!["generate", "--model-dir", s(model()), "--out", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn usage_errors_exit_2() {
    let out = scratch("usage");
    assert_eq!(mixgen(&["train", "--epd", &data("coefficients-v1.txt"), "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(mixgen(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mixgen(&["generate", "--model-dir", "x", "--group", "d14", "--count", "ten", "--out", "y"]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn runtime_errors_exit_1() {
    let taken = scratch("taken");
    fs::create_dir_all(&taken).unwrap();
    fs::write(taken.join("keep.txt"), "x").unwrap();
    let r = mixgen(&["train", "--data", &data("concrete.csv"), "--epd", &data("coefficients-v1.txt"), "--out", s(&taken)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("not empty"));
    assert_eq!(fs::read_to_string(taken.join("keep.txt")).unwrap(), "x");

    let out = scratch("missing_data");
    let r = mixgen(&["train", "--data", "/nonexistent.csv", "--epd", &data("coefficients-v1.txt"), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn train_writes_bundle_and_metrics() {
    let dir = model();
    for f in ["cvae.model", "predictors.model", "metadata.json", "metrics.json", "dataset.csv", "coefficients.txt", "loss_history.csv"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let metrics: Value = serde_json::from_slice(&fs::read(dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["impact"].as_array().unwrap().len(), 3);
    assert_eq!(metrics["strength"].as_array().unwrap().len(), 6);
    let m = manifest(dir);
    assert_eq!(m["command"], "train");
    assert_eq!(m["seed"], 4);
    assert!(m["config"].get("out").is_none());
    let listed: Vec<_> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap().to_string()).collect();
    assert!(listed.contains(&"cvae.model".to_string()));
    let (_, losses) = csv_rows(&dir.join("loss_history.csv"));
    assert_eq!(losses.len(), 30);
}

#[test]
fn generate_writes_requested_rows() {
    let out = generate("gen_d14", &["--group", "d14", "--count", "1000", "--seed", "2"]);
    let (header, rows) = csv_rows(&out.join("samples_D14.csv"));
    assert_eq!(header, SAMPLE_HEADER);
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| &r[1] == "D14"));
    let m = manifest(&out);
    assert_eq!(m["seed"], 2);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 1);
}

#[test]
fn generate_defaults_to_sixty_thousand() {
    let out = generate("gen_default", &["--group", "ge90"]);
    let (_, rows) = csv_rows(&out.join("samples_GE90.csv"));
    assert_eq!(rows.len(), 60_000);
}

#[test]
fn superplasticizer_scale_applies_to_the_column() {
    let full = generate("sp_full", &["--group", "d28", "--count", "200"]);
    let quarter = generate("sp_quarter", &["--group", "d28", "--count", "200", "--superplasticizer-scale", "0.25"]);
    let (_, a) = csv_rows(&full.join("samples_D28.csv"));
    let (_, b) = csv_rows(&quarter.join("samples_D28.csv"));
    for (x, y) in a.iter().zip(&b) {
        let sx: f64 = x[6].parse().unwrap();
        let sy: f64 = y[6].parse().unwrap();
        assert!((sy - 0.25 * sx).abs() <= 1e-9 * sx.abs().max(1.0), "{sx} {sy}");
        assert_eq!(&x[2], &y[2]);
    }
}

#[test]
fn tampered_model_dir_is_rejected() {
    let copy = scratch("tampered");
    fs::create_dir_all(&copy).unwrap();
    for e in fs::read_dir(model()).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), copy.join(e.file_name())).unwrap();
    }
    let mut bytes = fs::read(copy.join("dataset.csv")).unwrap();
    bytes.extend_from_slice(b"\n");
    fs::write(copy.join("dataset.csv"), bytes).unwrap();
    let out = scratch("tampered_out");
    let r = mixgen(&["generate", "--model-dir", s(&copy), "--group", "d7", "--count", "5", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("checksum"));
}

#[test]
fn flags_override_the_config_file() {
    let cfg = scratch("config.json");
    fs::write(&cfg, r#"{"count": 7, "seed": 3, "group": "d7"}"#).unwrap();
    let out = scratch("configured");
    ok(&["generate", "--config", s(&cfg), "--model-dir", s(model()), "--count", "9", "--out", s(&out)]);
    let (_, rows) = csv_rows(&out.join("samples_D7.csv"));
    assert_eq!(rows.len(), 9);
    let m = manifest(&out);
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config"]["count"], 9);
}

#[test]
fn reduce_writes_one_row_per_center() {
    let gen = generate("reduce_gen", &["--group", "d28", "--count", "3000", "--seed", "1"]);
    let out = scratch("reduce_out");
    ok(&[
        "analyze", "reduce", "--model-dir", s(model()), "--samples", s(&gen.join("samples_D28.csv")),
        "--group", "d28", "--strength", "40", "--out", s(&out),
    ]);
    let (header, rows) = csv_rows(&out.join("reduction.csv"));
    assert!(header.starts_with("age_group,strength_center,strength_tolerance,gwp_reduction_pct"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "D28");
    let (header, dominating) = csv_rows(&out.join("dominating_40.csv"));
    assert_eq!(header, SAMPLE_HEADER);
    assert_eq!(dominating.len().to_string(), &rows[0][6]);
}

#[test]
fn hull_with_too_few_points_warns() {
    let gen = generate("hull_gen", &["--group", "d28", "--count", "3"]);
    let out = scratch("hull_out");
    ok(&[
        "analyze", "hull", "--model-dir", s(model()), "--samples", s(&gen.join("samples_D28.csv")),
        "--group", "d28", "--strength", "40", "--out", s(&out),
    ]);
    let body: Value = serde_json::from_slice(&fs::read(out.join("hull.json")).unwrap()).unwrap();
    assert!(body["points"].as_array().unwrap().len() < 4);
    assert!(body["hull"].is_null());
    assert!(body["warning"].is_string());
}

#[test]
fn progression_writes_rows_and_rmse() {
    let out = scratch("progression");
    ok(&["analyze", "progression", "--model-dir", s(model()), "--group", "d7", "--out", s(&out)]);
    let (header, rows) = csv_rows(&out.join("progression_D7.csv"));
    assert!(header.starts_with("index,conditioned_strength,predicted_strength,cement"));
    assert_eq!(rows.len(), 10_000);
    let m = manifest(&out);
    assert!(m["results"]["D7"]["rmse"].as_f64().unwrap() > 0.0);
    assert_eq!(m["results"]["lowest_rmse_group"], "D7");
}

#[test]
fn calibrate_reproduces_the_shipped_table() {
    let out = scratch("calibrate");
    ok(&["calibrate", "--out", s(&out)]);
    assert_eq!(fs::read(out.join("coefficients.txt")).unwrap(), fs::read(data("coefficients-v1.txt")).unwrap());
}

#[test]
fn benchmark_defaults_to_lab_mixes() {
    let out = scratch("benchmark");
    ok(&["analyze", "benchmark", "--out", s(&out)]);
    let (header, rows) = csv_rows(&out.join("benchmark.csv"));
    assert_eq!(header, "label,strength_mpa,gwp,benchmark_psi,benchmark_gwp,percent_below,flagged");
    assert_eq!(rows.len(), 5);
}

#[test]
fn isomap_embeds_a_mix_list() {
    let gen = generate("isomap_gen", &["--group", "d28", "--count", "60"]);
    let out = scratch("isomap");
    ok(&["analyze", "isomap", "--mixes", s(&gen.join("samples_D28.csv")), "--k", "8", "--k-max", "20", "--out", s(&out)]);
    let body: Value = serde_json::from_slice(&fs::read(out.join("embedding.json")).unwrap()).unwrap();
    assert_eq!(body["labels"].as_array().unwrap().len(), 60);
    assert_eq!(body["embedding"]["coordinates"].as_array().unwrap().len(), 60);
}
