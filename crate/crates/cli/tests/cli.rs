use std::path::Path;
use std::process::{Command, Output};

use flowpart::datagen::{columns_to_csv, load_dataset};
use flowpart::evalcv::MetricsReport;
use flowpart::grid::CellField;

fn flowpart(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowpart")).current_dir(dir).args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn small_dataset(dir: &Path) {
    ok(&flowpart(
        dir,
        &[
            "generate",
            "-s",
            "mesh=10x10",
            "-s",
            "plan=2:2,2:2,2:2,3:3",
            "-s",
            "test_fraction=0.25",
            "--workers",
            "2",
            "--seed",
            "3",
        ],
    ));
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_in_darcy_regime() {
    let dir = tempfile::tempdir().unwrap();
    ok(&flowpart(dir.path(), &["solve", "-s", "mesh=12x8", "-s", "delta=0.999999", "-o", "run"]));
    let run = dir.path().join("run");
    let report = json(&run.join("solve_report.json"));
    assert_eq!(report["converged"], true);
    assert!(report["iterations"].as_u64().unwrap() <= 2);
    assert_eq!(report["gf_fraction"], 0.0);
    let pgm = std::fs::read_to_string(run.join("labels.pgm")).unwrap();
    assert_eq!(pgm.lines().nth(1).unwrap().trim(), "12 8");
    let p = CellField::from_csv_str(&std::fs::read_to_string(run.join("pressure.csv")).unwrap()).unwrap();
    assert_eq!(p.dims(), (12, 8));
}

#[test]
fn unconverged_solve_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowpart(dir.path(), &["solve", "-s", "mesh=20x20", "-s", "u0=0.03", "-s", "max_iter=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("out/solve_report.json").exists());
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowpart(dir.path(), &["solve", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing.cfg") && err.contains("Usage"));
    assert_eq!(flowpart(dir.path(), &["solve", "-s", "bogus=1"]).status.code(), Some(1));
    assert_eq!(flowpart(dir.path(), &["solve", "-s", "mesh=ten"]).status.code(), Some(1));
}

#[test]
fn config_file_and_help() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# darcy column\nmesh = 6x6\ndelta = 0.999999\nout = fromfile\n")
        .unwrap();
    ok(&flowpart(dir.path(), &["solve", "--config", "run.cfg"]));
    assert_eq!(json(&dir.path().join("fromfile/solve_report.json"))["nx"], 6);
    let help = String::from_utf8_lossy(&flowpart(dir.path(), &["train", "--help"]).stdout).to_string();
    for key in ["case = landfill", "kappa = 5", "threshold = 0.5", "learning_rates = 0.1,0.01,0.0075,0.001"] {
        assert!(help.contains(key), "{key} missing from help");
    }
}

#[test]
fn generation_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    small_dataset(a.path());
    ok(&flowpart(
        b.path(),
        &[
            "generate",
            "-s",
            "mesh=10x10",
            "-s",
            "plan=2:2,2:2,2:2,3:3",
            "-s",
            "test_fraction=0.25",
            "--workers",
            "1",
            "--seed",
            "3",
        ],
    ));
    for part in ["all", "train", "test"] {
        for file in ["features.csv", "labels.csv"] {
            let fa = std::fs::read(a.path().join("dataset").join(part).join(file)).unwrap();
            let fb = std::fs::read(b.path().join("dataset").join(part).join(file)).unwrap();
            assert_eq!(fa, fb, "{part}/{file}");
        }
    }
    let all = load_dataset(a.path().join("dataset/all")).unwrap();
    assert_eq!(all.n_examples(), 48);
    assert_eq!(load_dataset(a.path().join("dataset/test")).unwrap().n_examples(), 12);
}

#[test]
fn crossval_train_evaluate_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d);
    ok(&flowpart(
        d,
        &[
            "crossval",
            "-s",
            "cv_hidden=8;6,6",
            "-s",
            "learning_rates=0.1,0.01,0.001",
            "-s",
            "max_iterations=50",
            "-o",
            "cv",
        ],
    ));
    let rows = std::fs::read_to_string(d.join("cv/cv_results.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 3);
    let best = json(&d.join("cv/best.json"));
    assert_eq!(best["metric"], "recall");
    assert_eq!(best["kappa"], 5);

    ok(&flowpart(d, &["train", "-s", "best=cv/best.json", "-s", "max_iterations=40", "-o", "tr"]));
    let curve = std::fs::read_to_string(d.join("tr/cost_history.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "iteration,train_cost,test_cost");
    assert!(d.join("model/model.json").exists());

    ok(&flowpart(d, &["evaluate", "-o", "ev", "-s", "pgm=true"]));
    let report: MetricsReport =
        serde_json::from_str(&std::fs::read_to_string(d.join("ev/metrics.json")).unwrap()).unwrap();
    assert_eq!(report.threshold, 0.5);
    assert_eq!(report.counts.total(), 12 * 100);
    assert!(d.join("ev/parity.csv").exists() && d.join("ev/confusion.csv").exists());
    assert_eq!(std::fs::read_dir(d.join("ev/maps")).unwrap().count(), 12);

    ok(&flowpart(d, &["evaluate", "-o", "ev75", "--threshold", "0.75"]));
    let high: MetricsReport =
        serde_json::from_str(&std::fs::read_to_string(d.join("ev75/metrics.json")).unwrap()).unwrap();
    assert_eq!(high.threshold, 0.75);
    assert!(high.counts.tp + high.counts.fp <= report.counts.tp + report.counts.fp);

    let rows =
        "u0,cf,m,delta,n_channels,phi1,phi2,phi3,phi4,phi5,phi6,phi7\n0.012,0.8,2.2,0.08,2,0.95,0.97,0,0,0,0,0\n";
    std::fs::write(d.join("rows.csv"), rows).unwrap();
    let out = flowpart(d, &["predict", "-s", "input=rows.csv", "-o", "pr"]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert_eq!(text.trim().len(), 100);
    assert!(text.trim().bytes().all(|b| b == b'0' || b == b'1'));

    std::fs::write(d.join("short.csv"), "0.012,0.8,2.2\n").unwrap();
    assert_eq!(flowpart(d, &["predict", "-s", "input=short.csv"]).status.code(), Some(3));
}

#[test]
fn evaluate_perfect_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d);
    let test = load_dataset(d.join("dataset/all")).unwrap();
    std::fs::write(d.join("perfect.csv"), columns_to_csv(&test.labels_f64(), None)).unwrap();
    ok(&flowpart(d, &["evaluate", "-s", "split=all", "-s", "predictions=perfect.csv", "-o", "ev"]));
    let m = json(&d.join("ev/metrics.json"));
    assert_eq!((m["recall"].as_f64(), m["precision"].as_f64()), (Some(1.0), Some(1.0)));
    assert_eq!(m["error_rate"], 0.0);

    std::fs::write(d.join("bad.csv"), "0.5,0.5\n").unwrap();
    let out = flowpart(d, &["evaluate", "-s", "split=all", "-s", "predictions=bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(flowpart(d, &["evaluate", "-s", "dataset=nowhere"]).status.code(), Some(3));
}
