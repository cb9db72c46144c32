use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_sewcx"))
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("job.json");
    fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn two_point_csv_matches_commutator_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["correlator"], &config("two_point.json"), &out), 0);
    let csv = fs::read_to_string(out.join("correlator.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("e_z1,e_z2,numerator,denominator"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    // [a_n, a_{-n}] = n puts n at z1^{-n-1} z2^{n-1}
    for n in 1..=10i64 {
        let want = format!("{},{},{n},1", -n - 1, n - 1);
        assert!(rows.contains(&want.as_str()), "missing {want}");
    }
    let report = json(&out.join("report.json"));
    assert_eq!(report["routes_agree"], true);
    assert!(report.get("decay_slope").is_none());
}

#[test]
fn numeric_mode_reports_floats_and_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["correlator", "--mode", "numeric"], &config("two_point.json"), &out), 0);
    let csv = fs::read_to_string(out.join("correlator.csv")).unwrap();
    assert!(csv.starts_with("e_z1,e_z2,re,im\n"));
    let v = json(&out.join("report.json"))["value"].clone();
    // 1 / (z1 - z2)^2 at z1 = 2, z2 = 0.5 + 0.5i
    let d = (1.5f64, -0.5f64);
    let sq = (d.0 * d.0 - d.1 * d.1, 2.0 * d.0 * d.1);
    let norm = sq.0 * sq.0 + sq.1 * sq.1;
    assert!((v[0].as_f64().unwrap() - sq.0 / norm).abs() < 1e-12);
    assert!((v[1].as_f64().unwrap() + sq.1 / norm).abs() < 1e-12);
}

#[test]
fn rational_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, cfg, file) in
        [("correlator", "two_point.json", "correlator.csv"), ("sew", "currents_sew.json", "sew.csv")]
    {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        assert_eq!(run(&[cmd], &config(cfg), &a), 0);
        assert_eq!(run(&[cmd], &config(cfg), &b), 0);
        for f in [file, "report.json"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{cmd} {f}");
        }
    }
}

#[test]
fn empty_result_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"command": "correlator", "insertions": [{"state": [1], "var": "z", "window": [-6, 6]}]}"#,
    );
    let out = dir.path().join("o");
    assert_eq!(run(&["correlator"], &cfg, &out), 0);
    assert_eq!(fs::read_to_string(out.join("correlator.csv")).unwrap(), "e_z,numerator,denominator\n");
}

#[test]
fn vacuum_sewing_is_a_single_unit_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    assert_eq!(run(&["sew"], &config("vacuum_sew.json"), &out), 0);
    assert_eq!(
        fs::read_to_string(out.join("sew.csv")).unwrap(),
        "l,e_zeta1,e_zeta2,numerator,denominator\n0,0,0,1,1\n"
    );
    let out = dir.path().join("n");
    assert_eq!(run(&["sew", "--mode", "numeric"], &config("vacuum_sew.json"), &out), 0);
    let csv = fs::read_to_string(out.join("sew.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows[0], "0,1,0");
    assert!(rows[1..].iter().all(|r| r.ends_with(",0,0")));
}

#[test]
fn complex_check_passes_and_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ok");
    assert_eq!(run(&["check-complex"], &config("complex_m2.json"), &out), 0);
    let r = json(&out.join("report.json"));
    assert_eq!(r["max_residual"]["numerator"], "0");
    assert_eq!(r["nonzero"], 0);
    assert_eq!(r["ladder_passed"], true);
    assert!(r.get("decay_slope").is_none());

    let text = fs::read_to_string(config("complex_m2.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v["flip_sign"] = serde_json::json!([2, 1]);
    let cfg = write_config(dir.path(), &v.to_string());
    let bad = dir.path().join("bad");
    assert_eq!(run(&["check-complex"], &cfg, &bad), 3);
    let r = json(&bad.join("report.json"));
    assert!(r["nonzero"].as_u64().unwrap() > 0);
    assert_ne!(r["max_residual"]["numerator"], "0");
}

#[test]
fn convergence_report_has_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    assert_eq!(run(&["convergence"], &config("convergence.json"), &out), 0);
    let r = json(&out.join("report.json"));
    assert_eq!(r["violations"], 0);
    assert!(r["decay_slope"].as_f64().unwrap() < 0.0);
    assert!(r["M"].as_f64().unwrap() > 0.0);
    assert_eq!(r["rows"].as_array().unwrap().len(), 9);
    for row in r["rows"].as_array().unwrap() {
        assert!(row["magnitude"].as_f64().unwrap() <= row["bound"].as_f64().unwrap());
    }
    let sew = dir.path().join("s");
    assert_eq!(run(&["sew"], &config("currents_sew.json"), &sew), 0);
    assert!(json(&sew.join("report.json")).get("decay_slope").is_none());
}

#[test]
fn seeded_jitter_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["convergence", "--seed", "5"], &config("convergence.json"), &a), 0);
    assert_eq!(run(&["convergence", "--seed", "5"], &config("convergence.json"), &b), 0);
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    assert_eq!(json(&a.join("report.json"))["samples"], 6);
}

#[test]
fn schema_errors_exit_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("correlator", "{ not json"),
        ("correlator", r#"{"command": "correlator", "insertions": [], "bogus": 1}"#),
        ("sew", r#"{"command": "correlator", "insertions": []}"#),
        ("correlator", r#"{"command": "correlator", "insertions": [{"state": [1], "var": "z", "window": [3, -3]}]}"#),
        (
            "check-complex",
            r#"{"command": "check-complex", "m": 1, "weight_cutoff": 2, "window": [-2, 2], "relative_window": [-2, 2]}"#,
        ),
    ];
    for (i, (cmd, text)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), text);
        let out = dir.path().join(format!("o{i}"));
        assert_eq!(run(&[cmd], &cfg, &out), 2, "{text}");
        assert!(!out.exists());
    }
    // |ε| beyond the annulus and a negative radius
    let text = fs::read_to_string(config("convergence.json")).unwrap();
    for (key, val) in [("epsilon", serde_json::json!([1.5, 0.0])), ("rho1", serde_json::json!(-1.0))] {
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["numeric"][key] = val;
        let cfg = write_config(dir.path(), &v.to_string());
        let out = dir.path().join(format!("bad-{key}"));
        assert_eq!(run(&["convergence"], &cfg, &out), 2);
        assert!(!out.exists());
    }
}

#[test]
fn computation_errors_exit_one() {
    // θ and insertions fine, but the point sits on a pole of the closed form
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"command": "correlator",
            "insertions": [{"state": [1], "var": "z1", "window": [-4, 0]}, {"state": [1], "var": "z2", "window": [0, 4]}],
            "point": {"z1": [1.0, 0.0], "z2": [1.0, 0.0]}}"#,
    );
    let out = dir.path().join("o");
    assert_eq!(run(&["correlator", "--mode", "numeric"], &cfg, &out), 1);
}
