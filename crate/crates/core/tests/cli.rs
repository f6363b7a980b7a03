use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn badge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_badge"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

const CONFIG: &str = r#"
selector = { kind = "random" }
M = 20
B = 20
T = 2
R = 2
seed = 1
timing = false

[dataset]
kind = "synthetic"
classes = 3
dim = 4
n = 250
separation = 2.0
seed = 9

[model]
hidden_dim = 16
max_epochs = 40
"#;

fn write_config(dir: &Path) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_into(config: &str, out: &Path, extra: &[&str]) {
    let mut args = vec![
        "run",
        "--config",
        config,
        "--out-dir",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = badge(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_twice_gives_identical_result_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_into(&cfg, &a, &["--seed", "7"]);
    run_into(&cfg, &b, &["--seed", "7"]);
    for rep in ["rep_000.csv", "rep_001.csv"] {
        let fa = fs::read(a.join(rep)).unwrap();
        assert_eq!(fa, fs::read(b.join(rep)).unwrap(), "{rep}");
        let text = String::from_utf8(fa).unwrap();
        assert!(
            text.starts_with("rep,round,labels,test_accuracy,sel_time_s,log_gram_det,mean_norm")
        );
        assert_eq!(text.lines().count(), 1 + 3);
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["selector"], "rand");
    assert_eq!(manifest["seeds"], serde_json::json!([7, 8]));
}

#[test]
fn compare_two_algorithms_writes_square_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let rand = tmp.path().join("rand");
    let conf = tmp.path().join("conf");
    run_into(&cfg, &rand, &[]);
    run_into(&cfg, &conf, &["--selector", "conf"]);
    let out = tmp.path().join("cmp");
    let o = badge(&[
        "compare",
        rand.to_str().unwrap(),
        conf.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut r = csv::Reader::from_path(out.join("penalty_matrix.csv")).unwrap();
    let header = r.headers().unwrap().clone();
    assert_eq!(header.len(), 3);
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&header[1], &rows[0][0]);
    assert_eq!(&header[2], &rows[1][0]);
    for row in &rows {
        assert_eq!(row.len(), 3);
    }
    // Nothing beats itself.
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), 0.0);
    for f in [
        "penalty_column_means.csv",
        "normalized_error_cdf.csv",
        "learning_curves.csv",
        "settings.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn diag_writes_per_round_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let run = tmp.path().join("badge");
    run_into(&cfg, &run, &["--selector", "badge", "--reps", "1"]);
    let out = tmp.path().join("diag");
    let o = badge(&[
        "diag",
        run.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(text.lines().count() >= 3, "{text}");
}

#[test]
fn bench_samplers_reports_both_times() {
    let o = badge(&["bench-samplers", "--n", "300", "--dim", "8", "--k", "10"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.contains("kmeans++") && text.contains("k-dpp"),
        "{text}"
    );
}

#[test]
fn unknown_flag_fails_with_usage() {
    let o = badge(&["run", "--no-such-flag"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn missing_config_is_an_error() {
    let o = badge(&["run", "--config", "/nonexistent/exp.toml"]);
    assert!(!o.status.success());
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(
        &path,
        CONFIG.replace("timing = false", "timing = false\nbogus = 1"),
    )
    .unwrap();
    let o = badge(&["run", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
}
