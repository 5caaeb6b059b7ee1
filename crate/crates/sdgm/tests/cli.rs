//! Black-box tests of the sdgm binary: exit codes, output determinism,
//! configuration precedence and the spectra dump format.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sdgm");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_sim_csv(dir: &Path, name: &str, spec: &str) -> std::path::PathBuf {
    let spec_path = dir.join(format!("{name}.sim"));
    std::fs::write(&spec_path, spec).unwrap();
    let csv_path = dir.join(format!("{name}.csv"));
    let out = run(&[
        "simulate",
        spec_path.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "simulate failed: {}", stderr(&out));
    csv_path
}

const TRI_SPEC: &str = "seed = 11\n\
    type.a = poisson(150)\n\
    type.b = poisson(150)\n\
    type.c = poisson(150)\n";

#[test]
fn analyze_outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_sim_csv(dir.path(), "tri", TRI_SPEC);
    let mut dumps = Vec::new();
    for rep in 0..2 {
        let json = dir.path().join(format!("g{rep}.json"));
        let dot = dir.path().join(format!("g{rep}.dot"));
        let out = run(&[
            "analyze",
            csv.to_str().unwrap(),
            "--window",
            "0,0,1,1",
            "--grid-p",
            "8",
            "--out-json",
            json.to_str().unwrap(),
            "--out-dot",
            dot.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(stdout(&out).contains("pairs:"));
        dumps.push((std::fs::read(&json).unwrap(), std::fs::read(&dot).unwrap()));
    }
    assert_eq!(dumps[0], dumps[1], "repeated runs must be byte-identical");
    let json_text = String::from_utf8(dumps[0].0.clone()).unwrap();
    assert!(json_text.contains("\"nodes\""));
}

#[test]
fn simulate_is_deterministic_and_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read(write_sim_csv(dir.path(), "one", TRI_SPEC)).unwrap();
    let b = std::fs::read(write_sim_csv(dir.path(), "two", TRI_SPEC)).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("x,y,type\n"));
    for label in ["a", "b", "c"] {
        assert!(text.lines().any(|l| l.ends_with(&format!(",{label}"))));
    }
}

#[test]
fn bivariate_needs_explicit_flag() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_sim_csv(
        dir.path(),
        "bi",
        "seed = 3\ntype.a = poisson(120)\ntype.b = poisson(120)\n",
    );
    let base = ["analyze", csv.to_str().unwrap(), "--window", "0,0,1,1", "--grid-p", "8"];
    let refused = run(&base);
    assert_eq!(refused.status.code(), Some(1));
    assert!(stderr(&refused).contains("allow-bivariate"));
    let mut allowed = base.to_vec();
    allowed.push("--allow-bivariate");
    let out = run(&allowed);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn missing_input_exits_one() {
    let out = run(&["analyze", "/nonexistent/points.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!stderr(&out).is_empty());
}

#[test]
fn spectra_auto_dumps_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_sim_csv(dir.path(), "tri", TRI_SPEC);
    let out = run(&[
        "spectra",
        csv.to_str().unwrap(),
        "--window",
        "0,0,1,1",
        "--field",
        "auto",
        "--type",
        "a",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,q,value"));
    // default grid: p in 0..=16, q in -16..16
    assert_eq!(lines.clone().count(), 17 * 32);
    assert!(lines.next().unwrap().starts_with("0,-16,"));
}

#[test]
fn spectra_dij_stays_in_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_sim_csv(dir.path(), "tri", TRI_SPEC);
    let out = run(&[
        "spectra",
        csv.to_str().unwrap(),
        "--window",
        "0,0,1,1",
        "--grid-p",
        "8",
        "--field",
        "dij",
        "--pair",
        "a,b",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for line in stdout(&out).lines().skip(1) {
        let value = line.rsplit(',').next().unwrap();
        if value.is_empty() {
            continue; // dropped or excluded frequency
        }
        let v: f64 = value.parse().unwrap();
        assert!((0.0..=1.0 + 1e-9).contains(&v), "|d| = {v} out of bounds");
    }
}

#[test]
fn spectra_unknown_type_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_sim_csv(dir.path(), "tri", TRI_SPEC);
    let out = run(&[
        "spectra",
        csv.to_str().unwrap(),
        "--window",
        "0,0,1,1",
        "--field",
        "auto",
        "--type",
        "zebra",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("zebra"));
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_sim_csv(dir.path(), "tri", TRI_SPEC);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "alpha = 0.9\ngrid-p = 8\nsmooth-h = 3\n").unwrap();
    let base = [
        "analyze",
        csv.to_str().unwrap(),
        "--window",
        "0,0,1,1",
        "--config",
        cfg.to_str().unwrap(),
    ];
    let out = run(&base);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("alpha = 0.9"));
    assert!(text.contains("h=3"));

    let mut flags = base.to_vec();
    flags.extend(["--alpha", "0.2", "--smooth-h", "4"]);
    let out = run(&flags);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("alpha = 0.2"), "flag must override the config file");
    assert!(text.contains("h=4"));
}

#[test]
fn oracle_check_exit_codes() {
    let ok = run(&["oracle-check", "--d", "4", "--seed", "7", "--grid-p", "4"]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("all routes agree"));

    let bad = run(&["oracle-check", "--d", "2"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("d >= 3"));
}
