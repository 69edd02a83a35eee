use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ordinal_crc::io::{read_labeled_scores, CalibrationFile};
use ordinal_crc_core::calibration::{empirical_loss_sum, prepare, risk_budget};
use ordinal_crc_core::validate_dataset;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordinal-crc"))
        .args(args)
        .env_remove("ORDINAL_CRC_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, name: &str, classes: usize, per_class: usize) -> std::path::PathBuf {
    let path = dir.join(name);
    ok(&[
        "simulate",
        "--classes",
        &classes.to_string(),
        "--per-class",
        &per_class.to_string(),
        "--seed",
        "7",
        "--out",
        s(&path),
    ]);
    path
}

#[test]
fn simulate_writes_expected_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.csv", 10, 2000);
    let b = simulate(dir.path(), "b.csv", 10, 2000);
    let text = fs::read_to_string(&a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "label,p0,p1,p2,p3,p4,p5,p6,p7,p8,p9");
    assert_eq!(lines.count(), 20_000);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let rows = read_labeled_scores(&a).unwrap();
    assert_eq!(validate_dataset(&rows).unwrap(), 10);
    assert!((0..10).all(|c| rows.iter().filter(|r| r.label == c).count() == 2000));
}

#[test]
fn simulate_rejects_one_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--classes", "1", "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("classes"));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn calibrate_exact_and_binary() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "cal.csv", 6, 100);
    let exact_path = dir.path().join("exact.json");
    let binary_path = dir.path().join("binary.json");
    let common = ["calibrate", "--scores", s(&data), "--alpha", "0.1", "--loss", "weighted", "--weights", "equal"];
    ok(&[&common[..], &["--method", "exact", "--out", s(&exact_path)]].concat());
    ok(&[&common[..], &["--method", "binary", "--delta", "1e-4", "--out", s(&binary_path)]].concat());

    let exact = CalibrationFile::read(&exact_path).unwrap();
    let binary = CalibrationFile::read(&binary_path).unwrap();
    assert_eq!((exact.n, exact.classes), (600, 6));
    assert!((exact.lambda_hat - binary.lambda_hat).abs() <= 1e-4);

    // Independent feasibility check of the written threshold.
    let rows = read_labeled_scores(&data).unwrap();
    for file in [&exact, &binary] {
        let prepared = prepare(&rows, &file.loss).unwrap();
        let refs: Vec<_> = prepared.iter().collect();
        let sum = empirical_loss_sum(&refs, &file.loss, file.lambda_hat);
        assert!(sum <= risk_budget(file.alpha, file.n, &file.loss));
        assert_eq!(sum, file.empirical_sum);
    }

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&exact_path).unwrap()).unwrap();
    for key in ["schema_version", "lambda_hat", "alpha", "n", "method", "loss", "empirical_sum", "M", "max_jump"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }

    // Without --out the JSON goes to stdout.
    let out = ok(&[&common[..], &["--method", "exact"]].concat());
    let streamed: CalibrationFile = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(streamed, exact);
}

#[test]
fn calibrate_infeasible_alpha_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "cal.csv", 4, 25);
    let out = run(&["calibrate", "--scores", s(&data), "--alpha", "0.0001"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible: alpha below B/(n+1)"));
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["calibrate", "--scores", s(&missing), "--alpha", "0.1"]).status.code(), Some(3));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "label,p0,p1\n0,0.5,oops\n").unwrap();
    assert_eq!(run(&["calibrate", "--scores", s(&bad), "--alpha", "0.1"]).status.code(), Some(1));

    let data = simulate(dir.path(), "d.csv", 3, 10);
    assert_eq!(run(&["calibrate", "--scores", s(&data), "--alpha", "1.5"]).status.code(), Some(1));
    assert_eq!(
        run(&["calibrate", "--scores", s(&data), "--alpha", "0.2", "--method", "binary", "--delta", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["calibrate", "--scores", s(&data)]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn predict_examples() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    fs::write(&scores, "label,p0,p1,p2,p3,p4\n2,0.1,0.2,0.4,0.2,0.1\n0,0.5,0.2,0.1,0.1,0.1\n").unwrap();

    let out = ok(&["predict", "--scores", s(&scores), "--lambda", "0.35", "--weights", "equal"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "lower,upper,width,centroid,point_prediction");
    assert_eq!(lines.next().unwrap(), "1,3,3,2,2");

    let out = ok(&["predict", "--scores", s(&scores), "--lambda", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().skip(1).collect::<Vec<_>>(), ["2,2,1,2,2", "0,0,1,0,0"]);

    let out = ok(&["predict", "--scores", s(&scores), "--lambda", "0", "--loss", "divergence"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().skip(1).collect::<Vec<_>>(), ["0,4,5,2,2", "0,4,5,2,0"]);

    assert_eq!(run(&["predict", "--scores", s(&scores), "--lambda", "1.5"]).status.code(), Some(1));
    assert_eq!(run(&["predict", "--scores", s(&scores)]).status.code(), Some(1));
}

#[test]
fn predict_from_calibration_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "cal.csv", 5, 60);
    let cal = dir.path().join("cal.json");
    ok(&["calibrate", "--scores", s(&data), "--alpha", "0.1", "--loss", "divergence", "--out", s(&cal)]);

    let unlabeled = dir.path().join("new.csv");
    fs::write(&unlabeled, "p0,p1,p2,p3,p4\n0.05,0.1,0.7,0.1,0.05\n").unwrap();
    let sets = dir.path().join("sets.csv");
    ok(&["predict", "--scores", s(&unlabeled), "--calibration", s(&cal), "--out", s(&sets)]);
    let text = fs::read_to_string(&sets).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().ends_with(",2"));

    let wrong_k = dir.path().join("k3.csv");
    fs::write(&wrong_k, "p0,p1,p2\n0.2,0.5,0.3\n").unwrap();
    assert_eq!(run(&["predict", "--scores", s(&wrong_k), "--calibration", s(&cal)]).status.code(), Some(1));
    assert_eq!(
        run(&["predict", "--scores", s(&unlabeled), "--calibration", s(&cal), "--loss", "weighted"]).status.code(),
        Some(1)
    );
}

#[test]
fn evaluate_writes_report_and_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "sim.csv", 10, 200);
    let report = dir.path().join("report.json");
    let curve = dir.path().join("curve.csv");
    let centroids = dir.path().join("centroids.csv");
    ok(&[
        "--threads",
        "2",
        "evaluate",
        "--scores",
        s(&data),
        "--alpha",
        "0.02,0.08,0.14,0.20",
        "--trials",
        "20",
        "--out",
        s(&report),
        "--curve",
        s(&curve),
        "--centroids",
        s(&centroids),
    ]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    let reports = json["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 4);
    for r in reports {
        let alpha = r["alpha"].as_f64().unwrap();
        assert!((r["mean_risk"].as_f64().unwrap() - alpha).abs() <= 0.01);
    }
    let curve_text = fs::read_to_string(&curve).unwrap();
    assert!(curve_text.starts_with("alpha,mean_risk,risk_std_error,mean_size\n"));
    assert_eq!(curve_text.lines().count(), 5);
    assert_eq!(fs::read_to_string(&centroids).unwrap().lines().count(), 1 + 4 * 19);
}

#[test]
fn evaluate_flags_divergence_saturation() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "sim.csv", 10, 200);
    let report = dir.path().join("report.json");
    ok(&[
        "evaluate",
        "--scores",
        s(&data),
        "--loss",
        "divergence",
        "--alpha",
        "0.02,0.08,0.14,0.20",
        "--trials",
        "20",
        "--out",
        s(&report),
    ]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["saturated"], true);
    assert_eq!(json["saturation_index"], 1);
}

#[test]
fn evaluate_results_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "sim.csv", 6, 100);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let report = dir.path().join(format!("r{threads}.json"));
        let out = Command::new(env!("CARGO_BIN_EXE_ordinal-crc"))
            .args(["evaluate", "--scores", s(&data), "--alpha", "0.1", "--trials", "8", "--out", s(&report)])
            .env("ORDINAL_CRC_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        outputs.push(fs::read(&report).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn evaluate_target_size() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "sim.csv", 10, 200);
    let report = dir.path().join("report.json");
    ok(&["evaluate", "--scores", s(&data), "--target-size", "3", "--trials", "20", "--out", s(&report)]);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let size = json["reports"][0]["mean_set_size"].as_f64().unwrap();
    // Mean size is a step function of alpha; on this small dataset the
    // closest step can sit just outside the search tolerance.
    assert!((size - 3.0).abs() <= 0.05, "{size}");

    let out = run(&["evaluate", "--scores", s(&data), "--target-size", "11", "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evaluate_too_few_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("one.csv");
    fs::write(&data, "label,p0,p1\n0,0.7,0.3\n").unwrap();
    let out = run(&["evaluate", "--scores", s(&data), "--alpha", "0.5", "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("too few rows"));
}
