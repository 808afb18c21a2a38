use std::path::Path;
use std::process::{Command, Output};

use bachflow::analytics::{stable_manifold_point, BISECTION_RTOL};
use serde_json::Value;

fn bachflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bachflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["run", "--out", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    bachflow(&all)
}

fn column(csv_text: &str, name: &str) -> Vec<f64> {
    let mut lines = csv_text.lines();
    let idx = lines.next().unwrap().split(',').position(|c| c == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn json_file(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn r3_run_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["--geometry", "r3", "--h", "1", "2", "3", "4", "--t-end", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let want = include_str!("golden/r3_trajectory.csv");
    assert_eq!(got, want);
    assert!(got.starts_with("t,g00,g11,g22,g33,det_rel_drift,S,Ric11,Ric22,Ric33,K12,K13,K23\n"));
    for (name, v) in [("g00", 1.0), ("g11", 2.0), ("g22", 3.0), ("g33", 4.0)] {
        assert!(column(&got, name).iter().all(|x| *x == v));
    }
    assert_eq!(json_file(&dir.path().join("fate.json"))["fate"], "Static");
}

#[test]
fn nil_g00_strictly_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["--geometry", "nil", "--h", "1", "1", "1", "1", "--t-end", "100"]);
    assert_eq!(code(&o), 0);
    let g00 = column(&std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap(), "g00");
    assert!(g00.len() > 10);
    assert!(g00.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn e2_run_converges_flat() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["--geometry", "e2", "--h", "1", "1", "2", "1", "--t-end", "1e12"]);
    assert_eq!(code(&o), 0);
    let rep = json_file(&dir.path().join("fate.json"));
    assert_eq!(rep["fate"], "ConvergeFlat4");
    assert_eq!(rep["observed"]["fate"], "ConvergeFlat4");
    assert_eq!(rep["observed"]["stop"], "Stalled");
}

#[test]
fn config_file_accepts_decimal_strings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"geometry": "solv", "h": ["1", "1", "2", "1"], "t_end": "0.5", "rtol": "1e-11",
            "outputs": {"trajectory": "solv.csv", "fate": "solv.json"}}"#,
    )
    .unwrap();
    let o = run_in(dir.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = column(&std::fs::read_to_string(dir.path().join("solv.csv")).unwrap(), "t");
    assert_eq!(*t.last().unwrap(), 0.5);
    assert_eq!(json_file(&dir.path().join("solv.json"))["fate"], "CollapseToCurve");
}

#[test]
fn exit_0_and_1_from_verify() {
    let o = bachflow(&["verify", "--samples", "20"]);
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["passed"], true);
    assert!(rep["trace_free_worst"].as_f64().unwrap() <= 1e-12);
    for c in rep["identities"].as_array().unwrap() {
        assert!(c["worst_residual"].is_number());
    }

    let o = bachflow(&["verify", "--samples", "5", "--inject-fault", "Q3:1"]);
    assert_eq!(code(&o), 1);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    let failed: Vec<&str> = rep["failed"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(failed.contains(&"q3_difference_expansion"), "{failed:?}");
}

#[test]
fn exit_2_on_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"geometry": "nil", "h": [1, 1, 1, 1], "rtoll": 1e-9}"#).unwrap();
    assert_eq!(code(&run_in(dir.path(), &["--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&run_in(dir.path(), &["--geometry", "nil", "--h", "1", "-1", "1", "1"])), 2);
    assert_eq!(code(&run_in(dir.path(), &["--geometry", "h4", "--h", "1", "1", "1", "1"])), 2);
    assert_eq!(code(&bachflow(&["classify", "nil", "1", "1", "1"])), 2);
    assert_eq!(code(&bachflow(&["portrait", "--config", "/nonexistent/sweep.json"])), 2);
}

#[test]
fn exit_3_on_step_failure_after_writing_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["--geometry", "nil", "--h", "1", "1e20", "1e-20", "1"]);
    assert_eq!(code(&o), 3);
    assert!(dir.path().join("trajectory.csv").exists());
    let rep = json_file(&dir.path().join("fate.json"));
    assert_eq!(rep["observed"]["stop"], "StepFailure");
}

#[test]
fn classify_outputs_and_exit_4_near_the_separatrix() {
    let o = bachflow(&["classify", "s3", "1", "1", "1", "1"]);
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["fate"], "Static");
    let o = bachflow(&["classify", "solv", "1", "1", "2", "1"]);
    assert_eq!(rep["geometry"], "s3");
    assert_eq!(serde_json::from_slice::<Value>(&o.stdout).unwrap()["fate"], "CollapseToCurve");

    let c = 3.0;
    let p = stable_manifold_point(1.0, c, BISECTION_RTOL).unwrap();
    let h = [1.0, 1.0 / (p.b * c), p.b, c].map(|v| format!("{v:.17e}"));
    let mut args = vec!["classify", "s3"];
    args.extend(h.iter().map(|s| s.as_str()));
    let o = bachflow(&args);
    assert_eq!(code(&o), 4);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(rep["margin"].as_f64().unwrap().abs() < 1e-10);

    let off = [1.0, 1.0 / (0.8 * p.b * c), 0.8 * p.b, c].map(|v| format!("{v:.17e}"));
    let mut args = vec!["classify", "s3"];
    args.extend(off.iter().map(|s| s.as_str()));
    let o = bachflow(&args);
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["stratum"], "DL0");
    assert!(rep["margin"].as_f64().unwrap() < 0.0);
}

fn portrait(dir: &Path, sweep: &str, threads: &str) -> String {
    let cfg = dir.join("sweep.json");
    std::fs::write(&cfg, sweep).unwrap();
    let out = dir.join(format!("out{threads}"));
    let o = bachflow(&[
        "portrait",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        threads,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(out.join("portrait.csv")).unwrap()
}

const S3_SWEEP: &str = r#"{"geometry": "s3", "s3_plane": {"det_h": "1",
    "b": {"values": ["0.5", "1", "1.5874010519681994", "2.5"]},
    "c": {"values": ["1", "1.5874010519681994", "3", "8"]}}}"#;

#[test]
fn s3_portrait_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = portrait(dir.path(), S3_SWEEP, "2");
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 16);
    let at = |b: &str, c: &str| {
        rows.iter()
            .find(|r| r[5].parse::<f64>().unwrap() == b.parse::<f64>().unwrap() && r[6].parse::<f64>().unwrap() == c.parse::<f64>().unwrap())
            .unwrap()
            .clone()
    };
    assert_eq!(&at("1", "1")[7], "Static");
    // b = c = 4^(1/3) with det 1 puts a = b/4.
    let l1 = at("1.5874010519681994", "1.5874010519681994");
    assert_eq!((&l1[7], &l1[8]), ("CollapseTo3Manifold", "L1"));
    let fates: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.get(7).unwrap()).collect();
    assert!(fates.contains("ConvergeCurved4") && fates.contains("CollapseToSurface"));
    assert!(rows.iter().all(|r| r[19].is_empty()));
}

#[test]
fn sweep_output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(portrait(dir.path(), S3_SWEEP, "1"), portrait(dir.path(), S3_SWEEP, "4"));
    let run_sweep = r#"{"geometry": "solv", "base": ["1", "1", "2", "1"], "mode": "run",
        "axes": [{"component": 3, "min": "0.5", "max": "2", "n": 3}], "run": {"t_end": "5"}}"#;
    let one = portrait(dir.path(), run_sweep, "1");
    assert_eq!(one, portrait(dir.path(), run_sweep, "3"));
    assert_eq!(one.lines().count(), 4);
}

#[test]
fn per_point_failures_stay_in_their_row() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = r#"{"geometry": "nil", "mode": "run", "run": {"t_end": "1"},
        "axes": [{"component": 1, "values": ["1", "1e20"]}, {"component": 2, "values": ["1", "1e-20"]}]}"#;
    let text = portrait(dir.path(), sweep, "2");
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][7], "CollapseToSurface");
    assert_eq!(&rows[3][16], "StepFailure");
}
