use std::path::{Path, PathBuf};
use std::process::Command;

use polylab::report::to_json;
use polylab::{parse_json, parse_scenario, run_scenario, ScenarioError};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn polylab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_polylab"))
        .args(args)
        .env_remove("POLYLAB_CONFIG")
        .output()
        .expect("polylab runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn inline_scenario_runs_to_a_report() {
    let s = parse_scenario(
        "id = z1z2\ncommand = check-beurling\ncaps = 4,4\nsymbol = monomial 1,1\n",
        None,
    )
    .unwrap();
    let r = run_scenario(&s, false);
    assert!(r.is_ok(), "{}", r.status);
    assert_eq!(r.grid, Some(vec![4, 4]));
    assert_eq!(r.verdicts.get("beurling"), Some(&true));
    assert!(r.runtime_seconds.is_none());
}

#[test]
fn malformed_fields_name_their_line() {
    let err = parse_scenario("command = check-beurling\ncaps = 4,x\nsymbol = monomial 1,1\n", None).unwrap_err();
    assert!(matches!(err, ScenarioError::Field { line: 2, .. } | ScenarioError::Core(_)), "{err}");
    assert!(err.to_string().contains('2'), "{err}");
    let err = parse_scenario("command = check-beurling\ncaps = 4,4\n", None).unwrap_err();
    assert!(err.to_string().contains("symbol") || err.to_string().contains("subspace"), "{err}");
}

#[test]
fn json_reports_round_trip() {
    let s = parse_scenario("command = check-brehmer\ntuple = nilpotent 2\n", None).unwrap();
    let reports = vec![run_scenario(&s, false), run_scenario(&s, false)];
    let text = to_json(&reports);
    assert_eq!(parse_json(&text).unwrap(), reports);
    let single = to_json(&reports[..1]);
    assert!(single.trim_start().starts_with('{'));
    assert_eq!(parse_json(&single).unwrap(), reports[..1].to_vec());
}

#[test]
fn error_reports_keep_an_empty_residual_map() {
    let dir = tempfile::tempdir().unwrap();
    let s = parse_scenario("command = check-beurling\ncaps = 3,3\nsymbol_file = missing.sym\n", Some(dir.path())).unwrap();
    let r = run_scenario(&s, false);
    assert!(r.is_input_error(), "{}", r.status);
    assert!(r.residuals.is_empty());
    assert_eq!(r.exit_code(), 2);
    let v: serde_json::Value = serde_json::from_str(&to_json(&[r])).unwrap();
    assert_eq!(v["residuals"], serde_json::json!({}));
}

#[test]
fn scenario_directory_meets_its_expectations() {
    let dir = scenarios_dir();
    let out = polylab(&["--config", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reports = parse_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(reports.len(), 13);
    assert!(reports.iter().all(|r| r.mismatches.is_empty()));
    assert!(reports.iter().any(|r| r.id == "non-brehmer-dilation" && !r.is_ok()));
}

#[test]
fn exit_code_one_on_a_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "wrong.scn",
        "command = check-beurling\ncaps = 3,3\nsubspace = vanishing-at-origin\nbegin expect\nbeurling = pass\nend\n",
    );
    let out = polylab(&["--config", p.to_str().unwrap(), "--format", "text"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("beurling: expected pass, got fail"), "{stderr}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("✗ beurling"));
}

#[test]
fn exit_code_two_on_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.scn", "command = check-beurling\ncaps = 3,3\nsymbol = monomial 1,1\ntol = -1\n");
    let out = polylab(&["--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tol"));

    let good = write(dir.path(), "good.scn", "command = check-beurling\ncaps = 3,3\nsymbol = monomial 1,1\n");
    let out = polylab(&["--config", good.to_str().unwrap(), "--tol", "0"]);
    assert_eq!(out.status.code(), Some(2));

    let missing = write(dir.path(), "missing.scn", "command = check-beurling\ncaps = 3,3\nsymbol_file = nowhere.sym\n");
    let out = polylab(&["--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overrides_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "s.scn", "command = check-beurling\ncaps = 3,3\nsymbol = monomial 1,1\n");
    let out_path = dir.path().join("out.json");
    let out = polylab(&[
        "--config",
        p.to_str().unwrap(),
        "--degree",
        "5,5",
        "--tol",
        "1e-9",
        "--seed",
        "7",
        "--timing",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let r = parse_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap().remove(0);
    assert_eq!(r.grid, Some(vec![5, 5]));
    assert_eq!(r.tolerance.tol, 1e-9);
    assert_eq!(r.seed, 7);
    assert!(r.runtime_seconds.is_some());
}

#[test]
fn config_from_the_environment() {
    let p = scenarios_dir().join("z1z2-beurling.scn");
    let out = Command::new(env!("CARGO_BIN_EXE_polylab"))
        .env("POLYLAB_CONFIG", &p)
        .env("POLYLAB_FORMAT", "text")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("z1z2-beurling [check-beurling]"));
}
