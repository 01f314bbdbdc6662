use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vexspace(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vexspace"))
        .args(args)
        .current_dir(dir)
        .env_remove("VEXSPACE_THREADS")
        .output()
        .unwrap()
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json")).display().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn empty_scenario_list_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("empty.json"), "[]").unwrap();
    let out = vexspace(&["run", "empty.json", "--out-dir", "out"], tmp.path());
    assert!(out.status.success());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn kr_uniform_gap_is_compact() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vexspace(&["run", &bundled("kr-uniform-gap"), "--out-dir", "."], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cert = read_json(&tmp.path().join("kr-uniform-gap.certificate.json"));
    assert_eq!(cert["verdict"], "COMPACT");
    assert_eq!(cert["result"]["almost_compact"]["verdict"], "ALMOST_COMPACT");
    assert_eq!(cert["result"]["chain"].as_array().unwrap().len(), 3);
}

#[test]
fn classical_cantor_table_follows_the_power_envelope() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vexspace(&["run", &bundled("classical-cantor-asymptotics"), "--out-dir", "."], tmp.path());
    assert!(out.status.success());
    let report = read_json(&tmp.path().join("classical-cantor-asymptotics.certificate.json"));
    let s = (2.0f64 / 3.0).ln() / (1.0f64 / 3.0).ln();
    assert!((report["result"]["exponent"].as_f64().unwrap() - s).abs() < 1e-15);
    assert!((s - 0.36907).abs() < 1e-5);

    let mut rows = csv::Reader::from_path(tmp.path().join("classical-cantor-asymptotics.asymptotics.csv")).unwrap();
    let mut n = 0;
    for row in rows.records() {
        let row = row.unwrap();
        let t: f64 = row[0].parse().unwrap();
        let phi: f64 = row[2].parse().unwrap();
        let (lo, hi): (f64, f64) = (row[3].parse().unwrap(), row[4].parse().unwrap());
        assert!((lo - (2.0 / 3.0) * t.powf(s)).abs() <= 1e-14 * lo);
        assert!((hi - 6.0 * t.powf(s)).abs() <= 1e-14 * hi);
        assert!(lo <= phi && phi <= hi);
        n += 1;
    }
    assert_eq!(n, 19);
}

#[test]
fn schema_violations_exit_nonzero_with_line_context() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"{
  "name": "broken",
  "task": "certify-ae",
  "domain": {"kind": "interval", "lower": 0, "upper": 1},
  "p": {"kind": "constant", "value": 2},
  "q": {"kind": "family", "name": "uniform-gap", "params": {"delta": -1}}
}"#;
    fs::write(tmp.path().join("broken.json"), text).unwrap();
    let out = vexspace(&["run", "broken.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.json:6:"), "{err}");
    assert!(err.contains("q.params.delta"), "{err}");
    assert!(!tmp.path().join("broken.certificate.json").exists());

    fs::write(tmp.path().join("syntax.json"), "{\n  \"name\": \"x\",\n  \"task\": 3\n}").unwrap();
    let out = vexspace(&["run", "syntax.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax.json:3:"));
}

#[test]
fn inconclusive_verdicts_still_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    // zeta set with a singly logarithmic weight: the preset path cannot close
    let text = r#"{
  "name": "zeta-level-one",
  "task": "certify-ae",
  "domain": {"kind": "interval", "lower": 0, "upper": 1},
  "cantor": {"gaps": {"family": "zeta", "s": 2.0}, "stage": 40},
  "weight": {"level": 1, "beta": 0.5},
  "p": {"kind": "constant", "value": 3.0},
  "q": {"kind": "family", "name": "weighted-gap", "params": {}},
  "config": {"refinements": 1}
}"#;
    fs::write(tmp.path().join("z.json"), text).unwrap();
    let out = vexspace(&["run", "z.json"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cert = read_json(&tmp.path().join("zeta-level-one.certificate.json"));
    assert_eq!(cert["verdict"], "INCONCLUSIVE");
}

#[test]
fn flags_override_scenario_settings() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vexspace(
        &["run", &bundled("uniform-gap-interval"), "--a-list", "3,7", "--tol", "1e-9", "--grid-levels", "4"],
        tmp.path(),
    );
    assert!(out.status.success());
    let cert = read_json(&tmp.path().join("uniform-gap-interval.certificate.json"));
    let config = &cert["result"]["config"];
    assert_eq!(config["a_list"], serde_json::json!([3.0, 7.0]));
    assert_eq!(config["equimeasurable_tol"].as_f64(), Some(1e-9));
    assert_eq!(config["grid_levels"], 4);
}

#[test]
fn seeds_change_random_fields_only_when_asked() {
    let tmp = tempfile::tempdir().unwrap();
    let file = bundled("random-step-rearrangement");
    let csv = "random-step-rearrangement.rearrangement.csv";
    let read = |dir: &str| fs::read(tmp.path().join(dir).join(csv)).unwrap();
    for (dir, seed) in [("a", None), ("b", None), ("c", Some("99"))] {
        let mut args = vec!["run", file.as_str(), "--out-dir", dir];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        assert!(vexspace(&args, tmp.path()).status.success());
    }
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn bad_thread_cap_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_vexspace"))
        .args(["run", &bundled("split-exponent-norm")])
        .current_dir(tmp.path())
        .env("VEXSPACE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn grid_exponents_are_read_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("p.csv"), "x,p\n0.25,1.0\n0.75,2.0\n").unwrap();
    let text = r#"{
  "name": "grid-norm",
  "task": "norm",
  "domain": {"kind": "interval", "lower": 0, "upper": 1},
  "p": {"kind": "grid", "file": "p.csv"},
  "u": {"kind": "constant", "value": 2.0}
}"#;
    fs::write(tmp.path().join("g.json"), text).unwrap();
    let out = vexspace(&["run", "g.json"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&tmp.path().join("grid-norm.certificate.json"));
    let norm = report["result"]["norm"]["value"].as_f64().unwrap();
    assert!((norm - 2.0).abs() < 1e-10, "{norm}");
}
