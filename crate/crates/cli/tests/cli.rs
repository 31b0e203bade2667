use std::path::Path;
use std::process::{Command, Output};

fn augport(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augport"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json report on stdout")
}

const GBM_ARGS: [&str; 9] = ["--s0", "1", "--r", "0.005", "--sigma", "0.01", "--steps", "400", "--seed"];

#[test]
fn simulate_writes_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "gbm"];
    args.extend(GBM_ARGS);
    args.extend(["7", "--out", "a.csv"]);
    assert!(augport(&args, dir.path()).status.success());
    *args.last_mut().unwrap() = "b.csv";
    assert!(augport(&args, dir.path()).status.success());

    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# config_hash="));
    assert!(text.lines().next().unwrap().ends_with("seed=7"));
    let lines = data_lines(&text);
    assert_eq!(lines[0], "t,price");
    assert_eq!(lines.len() - 1, 401);
}

#[test]
fn zero_volatility_paths_ignore_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let o = augport(
            &["simulate", "gbm", "--r", "0.005", "--sigma", "0", "--steps", "50", "--seed", seed],
            dir.path(),
        );
        assert!(o.status.success());
        stdout(&o)
    };
    let (a, b) = (run("1"), run("2"));
    assert_eq!(data_lines(&a), data_lines(&b));
    assert_ne!(a.lines().next(), b.lines().next());
}

#[test]
fn missing_drift_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = augport(&["simulate", "gbm", "--sigma", "0.01"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--r"));
    let bad = augport(&["simulate", "gbm", "--r", "x"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "model = gbm\nr = 0.01\nsigma = 0.01\nsteps = 20\nseed = 3\n").unwrap();
    let from_file = augport(&["--config", "run.cfg", "simulate", "--r", "0.005"], dir.path());
    let from_flags = augport(
        &["simulate", "gbm", "--r", "0.005", "--sigma", "0.01", "--steps", "20", "--seed", "3"],
        dir.path(),
    );
    assert!(from_file.status.success());
    assert_eq!(stdout(&from_file), stdout(&from_flags));

    std::fs::write(dir.path().join("typo.cfg"), "sigmaa = 0.01\n").unwrap();
    let o = augport(&["--config", "typo.cfg", "simulate", "gbm", "--r", "0.005"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_default_passes_and_scales_with_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let o = augport(&["verify", "--out", "v1.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
    let o2 = augport(&["verify", "--lambda", "2", "--out", "v2.json"], dir.path());
    assert_eq!(o2.status.code(), Some(0));

    let read = |p: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(p)).unwrap()).unwrap()
    };
    let closed = |v: &serde_json::Value, check: &str| {
        v["rows"]
            .as_array()
            .unwrap()
            .iter()
            .find(|r| r["check"] == check)
            .unwrap()["closed_form"]
            .as_f64()
            .unwrap()
    };
    let (a, b) = (read("v1.json"), read("v2.json"));
    assert!(a["passed"].as_bool().unwrap());
    let ratio = closed(&b, "proposed utility") / closed(&a, "proposed utility");
    assert!((ratio - 0.5).abs() < 1e-12);
}

#[test]
fn verify_refuses_zero_volatility() {
    let dir = tempfile::tempdir().unwrap();
    let o = augport(&["verify", "--sigma", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("zero"));
}

#[test]
fn train_then_backtest() {
    let dir = tempfile::tempdir().unwrap();
    let mut sim = vec!["simulate", "gbm"];
    sim.extend(GBM_ARGS);
    sim.extend(["1", "--out", "p.csv"]);
    assert!(augport(&sim, dir.path()).status.success());

    let o = augport(
        &[
            "train", "--input", "p.csv", "--column", "price", "--scheme", "proposed", "--steps", "200", "--out",
            "m.json", "--no-short", "--lookback", "10",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&o);
    assert_eq!(report["scheme"], "proposed");
    assert!(report["final_loss"].as_f64().unwrap().is_finite());

    let o = augport(
        &[
            "backtest", "--input", "p.csv", "--column", "price", "--model", "m.json", "--start", "300", "--out",
            "w.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&o);
    assert_eq!(report["T"], 90);
    assert_eq!(report["strategy"], "model");
    let keys: Vec<&String> = report.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    let wealth = std::fs::read_to_string(dir.path().join("w.csv")).unwrap();
    for line in data_lines(&wealth).iter().skip(2) {
        let p: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn augment_writes_every_draw() {
    let dir = tempfile::tempdir().unwrap();
    let o = augport(
        &["augment", "--scheme", "additive", "--strength", "0.01", "--draws", "3", "--steps", "20"],
        dir.path(),
    );
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(data_lines(&text).len(), 1 + 3 * 21);
    let o = augport(&["augment", "--scheme", "additive"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metaopt_reports_a_grid_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = augport(&["metaopt", "--grid", "8", "--sets", "40"], dir.path());
    assert!(o.status.success());
    let r = json(&o);
    let theta = r["theta"].as_f64().unwrap();
    assert!(r["thetas"].as_array().unwrap().iter().any(|t| t.as_f64() == Some(theta)));
}

#[test]
fn pipeline_long_only_and_short_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = augport(
        &[
            "pipeline", "--steps", "100", "--seeds", "4", "--schemes", "none,proposed", "--no-short", "--positions",
            "pos.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["results"].as_array().unwrap().len(), 2);
    assert_eq!(r["ranking"].as_array().unwrap().len(), 2);
    let pos = std::fs::read_to_string(dir.path().join("pos.csv")).unwrap();
    let rows = data_lines(&pos);
    assert_eq!(rows.len(), 1 + 2 * 400);
    for line in &rows[1..] {
        let p: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    let mut sim = vec!["simulate", "gbm"];
    sim.extend(GBM_ARGS);
    sim.extend(["1", "--out", "p.csv"]);
    assert!(augport(&sim, dir.path()).status.success());
    let o = augport(
        &["pipeline", "--input", "p.csv", "--column", "price", "--train-len", "500"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("too short"));
}
