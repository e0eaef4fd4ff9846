use clap::Parser;
use martree::rational::{pow2, Rational};
use martree::universality::{ruler_ell, ruler_prefix};
use martree_cli::report::read_table;
use martree_cli::{run, Cli, CliError};
use num::BigInt;
use std::path::{Path, PathBuf};
use std::process::Command;

fn scene(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name)
        .display()
        .to_string()
}

fn invoke(args: &[&str], out: &Path) -> Result<martree_cli::Run, CliError> {
    let mut argv = vec!["martree"];
    argv.extend_from_slice(args);
    let out = out.display().to_string();
    argv.extend(["--out-dir", &out]);
    let cli = Cli::try_parse_from(&argv).unwrap();
    run(&cli, &argv.join(" "))
}

fn write_scene(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scene.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn rational(num: &str, den: &str) -> Rational {
    Rational::new(num.parse::<BigInt>().unwrap(), den.parse::<BigInt>().unwrap())
}

#[test]
fn universal_build_writes_a_sixteen_row_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let r = invoke(&["universal", "build", &scene("binary_uniform.json")], dir.path()).unwrap();
    assert_eq!(r.exit_code(), 0);
    let t = read_table(&dir.path().join("certificate.csv")).unwrap();
    assert_eq!(t.rows.len(), 16);
    let r_k = ruler_prefix(16);
    for (i, row) in t.rows.iter().enumerate() {
        let k = i as u64 + 1;
        assert_eq!(row[0], k.to_string());
        assert_eq!(row[1], r_k[i].to_string());
        assert_eq!(row[2], ruler_ell(k).to_string());
        assert_eq!(row[4], (2 + r_k[i]).to_string());
        let dist = rational(&row[5], &row[6]);
        let bound = rational(&row[8], &row[9]);
        assert_eq!(bound, pow2(-(ruler_ell(k) as i64)));
        assert!(dist < bound);
    }
    assert!(dir.path().join("summary.md").exists());
    let levels = read_table(&dir.path().join("martingale.csv")).unwrap();
    assert_eq!(levels.rows.len(), 31);
    // The seed is kept on B_2.
    for row in levels.rows.iter().filter(|r| r[1].parse::<usize>().unwrap() <= 2) {
        assert_eq!((row[2].as_str(), row[3].as_str(), row[4].as_str()), ("5", "1", "0"));
    }
}

#[test]
fn csv_rationals_match_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let r = invoke(&["measure", "build", &scene("binary_uniform.json"), "--depth", "3"], dir.path()).unwrap();
    let held = r.outcome.tables.iter().find(|t| t.name == "measure").unwrap();
    let read = read_table(&dir.path().join("measure.csv")).unwrap();
    assert_eq!(&read, held);
    let last = read.rows.last().unwrap();
    assert_eq!(last[0], "o/1/1/1");
    assert_eq!(last[1], "3");
    assert_eq!(rational(&last[2], &last[3]), pow2(-3));
}

#[test]
fn walk_estimate_agrees_with_the_stopped_walk() {
    let dir = tempfile::tempdir().unwrap();
    let r = invoke(&["walk", "estimate", &scene("degree3_isotropic.json")], dir.path()).unwrap();
    assert_eq!(r.exit_code(), 0);
    let t = read_table(&dir.path().join("estimate.csv")).unwrap();
    assert_eq!(t.rows.len(), 6);
    for row in &t.rows {
        let analytic: f64 = row[1].parse().unwrap();
        assert!((analytic - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(row[5], "true");
    }
}

#[test]
fn audit_sees_every_scheduled_visit() {
    let dir = tempfile::tempdir().unwrap();
    let r = invoke(&["universal", "audit", &scene("binary_uniform.json")], dir.path()).unwrap();
    assert_eq!(r.exit_code(), 0, "{:?}", r.outcome.checks);
    let d = read_table(&dir.path().join("density.csv")).unwrap();
    let first = &d.rows[0];
    assert_eq!(first[2], "8");
    assert!(rational(&first[3], &first[4]) >= Rational::new(8.into(), 31.into()));
}

#[test]
fn malformed_scenes_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        "{ not json",
        r#"{"tree": {"automaton": {"types": {"b": ["b","b"]}, "root_type": "b", "depth": 4}}, "colour": 3}"#,
        r#"{"version": 7, "tree": {"automaton": {"types": {"b": ["b","b"]}, "root_type": "b", "depth": 4}}}"#,
        r#"{"tree": {"automaton": {"types": {"b": ["b","b"]}, "root_type": "b", "depth": 4}}, "task": {"depth": 9}}"#,
        r#"{"tree": {"automaton": {"types": {"b": ["b","b"]}, "root_type": "b", "depth": 4}},
            "measure": {"split": {"c": ["1/2","1/2"]}}}"#,
        r#"{"tree": {"automaton": {"types": {"b": ["b","b"]}, "root_type": "b", "depth": 4}},
            "operator": {"kind": "forward_only", "coefficients": {"b": {"children": ["1/2","1/3"]}}}}"#,
    ];
    for text in bad {
        let p = write_scene(dir.path(), text);
        let e = invoke(&["tree", "check", p.to_str().unwrap()], dir.path()).unwrap_err();
        assert!(matches!(e, CliError::Config(_)), "{text}: {e}");
        assert_eq!(e.exit_code(), 2);
    }
    let e = invoke(&["universal", "build", &scene("binary_uniform.json"), "--depth", "40"], dir.path()).unwrap_err();
    assert!(matches!(e, CliError::Config(_)));
}

#[test]
fn degenerate_operator_cannot_be_made_universal() {
    let dir = tempfile::tempdir().unwrap();
    let e = invoke(&["universal", "build", &scene("ray_degenerate.json")], dir.path()).unwrap_err();
    assert!(matches!(e, CliError::Module { source: martree::Error::NoChainWithinDepth { .. }, .. }));
    let r = invoke(&["walk", "estimate", &scene("ray_degenerate.json")], dir.path()).unwrap();
    let t = read_table(&dir.path().join("estimate.csv")).unwrap();
    let ray = t.rows.iter().find(|row| row[0] == "o/0/0/0/0/0/0").unwrap();
    assert_eq!(ray[2], "1");
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_martree");
    let out = dir.path().display().to_string();
    let ok = Command::new(exe)
        .args(["dirichlet", "solve", &scene("skewed_walk.json"), "--out-dir", &out])
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    // An impossible tolerance turns the floating-point checks into violations.
    let strict = Command::new(exe)
        .args(["operator", "solve", &scene("skewed_walk.json"), "--tol", "1e-300", "--out-dir", &out])
        .status()
        .unwrap();
    assert_eq!(strict.code(), Some(1));
    let p = write_scene(dir.path(), "[]");
    let bad = Command::new(exe)
        .args(["tree", "check", p.to_str().unwrap(), "--out-dir", &out])
        .status()
        .unwrap();
    assert_eq!(bad.code(), Some(2));
}
