use std::process::{Command, Output};

fn paraverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paraverify"))
        .args(args)
        .env("PARAVERIFY_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn list_shows_required_builtins() {
    let o = paraverify(&["list"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in [
        "example21",
        "example21_flat",
        "example51",
        "synthetic_warped",
        "synthetic_doubly",
        "synthetic_bxf",
    ] {
        assert!(
            text.lines()
                .any(|l| l.split_whitespace().next() == Some(name)),
            "{name} missing"
        );
    }
}

#[test]
fn example21_passes_with_text_report() {
    let o = paraverify(&["run", "example21", "--samples", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("structure_class = paracosymplectic"));
    assert!(text.contains("christoffel_table"));
    assert!(text.trim_end().ends_with("overall: PASS"));
}

#[test]
fn example51_json_reports_verdicts_and_flag() {
    let o = paraverify(&["run", "example51", "--samples", "12", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["config"]["samples"], 12);
    assert_eq!(v["verdicts"]["submanifold_class"], "pr_semi_invariant");
    assert_eq!(v["verdicts"]["warp.fiber_scale"], "(v)^2");
    let notes = v["notes"].as_array().unwrap();
    assert!(notes
        .iter()
        .any(|n| n.as_str().unwrap().contains("disagrees with the fit")));
}

#[test]
fn json_is_byte_identical_for_fixed_seed() {
    let args = [
        "run",
        "synthetic_bxf",
        "--samples",
        "16",
        "--seed",
        "9",
        "--format",
        "json",
    ];
    let a = paraverify(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_paraverify"))
        .args(args)
        .env("PARAVERIFY_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn zero_samples_exits_2() {
    let o = paraverify(&["run", "example21", "--samples", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples"));
}

#[test]
fn unknown_scenario_exits_2() {
    assert_eq!(paraverify(&["run", "nonexistent"]).status.code(), Some(2));
}

#[test]
fn failing_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sc.json");
    let o = paraverify(&["export", "example21", "-o", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path)
        .unwrap()
        .replace("paracosymplectic", "para_sasakian");
    std::fs::write(&path, text).unwrap();
    let o = paraverify(&["run", path.to_str().unwrap(), "--samples", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("expected.structure_class"));
}

#[test]
fn degenerate_immersion_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("null.json");
    // a lightlike line in the flat plane: induced metric vanishes
    let text = r#"{
      "name": "null_line",
      "charts": [
        {"name": "P", "coords": ["a", "b"], "box": [[-1, 1], [-1, 1]]},
        {"name": "L", "coords": ["s"], "box": [[-1, 1]]}
      ],
      "metrics": [{"chart": "P", "signature": [1, 1], "entries": ["1", "0", "0", "-1"]}],
      "immersion": {"source": "L", "ambient": "P", "components": ["s", "s"]}
    }"#;
    std::fs::write(&path, text).unwrap();
    let o = paraverify(&["run", path.to_str().unwrap(), "--samples", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).to_lowercase().contains("lightlike"));
}

#[test]
fn export_roundtrip_gives_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e21.json");
    assert!(
        paraverify(&["export", "example21", "-o", path.to_str().unwrap()])
            .status
            .success()
    );
    let a = paraverify(&["run", "example21", "--samples", "10", "--format", "json"]);
    let b = paraverify(&[
        "run",
        path.to_str().unwrap(),
        "--samples",
        "10",
        "--format",
        "json",
    ]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn malformed_file_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"name\": \"x\",\n  \"charts\": [}\n").unwrap();
    let o = paraverify(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}
