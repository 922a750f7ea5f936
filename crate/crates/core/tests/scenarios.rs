use std::io::Write;

use paraverify_core::*;

fn hand_structure(h: &str, expected: &str) -> String {
    format!(
        r#"{{
  "name": "plane_times_line",
  "description": "h (dx^2 - dy^2) + dt^2 with phi swapping x and y",
  "charts": [{{"name": "N", "coords": ["x", "y", "t"], "box": [[-1, 1], [-1, 1], [-1, 1]]}}],
  "metrics": [{{"chart": "N", "signature": [2, 1], "entries": ["{h}", "0", "0", "0", "-({h})", "0", "0", "0", "1"]}}],
  "structure": {{"chart": "N", "phi": ["0", "1", "0", "1", "0", "0", "0", "0", "0"], "xi": ["0", "0", "1"], "eta": ["0", "0", "1"]}},
  "sampling": {{"n": 40}},
  "expected": {{"structure_class": "{expected}"}}
}}"#
    )
}

fn write_temp(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn hand_built_structure_is_paracosymplectic() {
    let f = write_temp(&hand_structure("1 + x^2", "paracosymplectic"));
    let sc = load_scenario_file(f.path()).unwrap();
    let r = run_scenario(&sc, &sc.config(None, None, None)).unwrap();
    assert_eq!(r.config.samples, 40);
    assert_eq!(r.verdicts["structure_class"], "paracosymplectic");
    assert!(r.pass, "{}", r.to_text());
}

#[test]
fn time_dependent_scale_breaks_parallel_eta() {
    let sc = parse_scenario(&hand_structure("exp(t)", "unclassified")).unwrap();
    let r = run_scenario(&sc, &sc.config(None, None, None)).unwrap();
    assert_eq!(r.verdicts["structure_class"], "unclassified");
    // (nabla_x eta)(d_x) = -Gamma^t_xx = e^t / 2 with t in [-1, 1]
    let c = r.check("classification.nabla_eta").unwrap();
    let e = std::f64::consts::E;
    assert!(
        c.residual() > 0.5 / e && c.residual() <= 0.5 * e + 1e-12,
        "{c:?}"
    );
}

#[test]
fn broken_structure_is_reported_not_fatal() {
    let text = hand_structure("1 + x^2", "paracosymplectic")
        .replace(r#""xi": ["0", "0", "1"]"#, r#""xi": ["0", "0", "2"]"#);
    let sc = parse_scenario(&text).unwrap();
    let r = run_scenario(&sc, &sc.config(None, None, None)).unwrap();
    assert!(!r.pass);
    assert!(!r.check("structure.eta_xi").unwrap().passed());
}

#[test]
fn missing_metrics_is_a_schema_error() {
    let text = r#"{"name": "bare", "charts": [{"name": "N", "coords": ["x"], "box": [[0, 1]]}]}"#;
    let err = load_scenario_file(write_temp(text).path()).unwrap_err();
    assert!(matches!(err, ScenarioError::Json(_)));
    assert!(err.to_string().contains("missing field `metrics`"), "{err}");
}

#[test]
fn unknown_field_is_rejected() {
    let text = hand_structure("1", "paracosymplectic").replace(r#""sampling""#, r#""sampels""#);
    let err = parse_scenario(&text).unwrap_err().to_string();
    assert!(err.contains("sampels"), "{err}");
}

#[test]
fn structure_references_must_resolve() {
    let text = hand_structure("1", "paracosymplectic").replace(
        r#""structure": {"chart": "N""#,
        r#""structure": {"chart": "Q""#,
    );
    let err = parse_scenario(&text).unwrap_err().to_string();
    assert!(
        err.contains("structure.chart") && err.contains("Q"),
        "{err}"
    );
}

#[test]
fn unparseable_entry_names_its_path() {
    let text = hand_structure("1", "paracosymplectic")
        .replace(r#""xi": ["0", "0", "1"]"#, r#""xi": ["0", "0", "1 +"]"#);
    let err = parse_scenario(&text).unwrap_err().to_string();
    assert!(err.contains("structure.xi[2]"), "{err}");
}

#[test]
fn zero_samples_is_a_config_error() {
    let sc = builtin("example21").unwrap();
    let err = run_scenario(&sc, &sc.config(Some(0), None, None)).unwrap_err();
    assert!(
        matches!(
            err,
            ScenarioError::Geometry(GeometryError::InvalidConfig(_))
        ),
        "{err}"
    );
}

#[test]
fn export_then_load_roundtrips_every_builtin() {
    for (name, _) in list_scenarios() {
        let sc = builtin(&name).unwrap();
        let f = write_temp(&export_scenario(&sc));
        assert_eq!(load_scenario_file(f.path()).unwrap(), sc, "{name}");
        assert_eq!(resolve_scenario(f.path().to_str().unwrap()).unwrap(), sc);
    }
}

#[test]
fn unknown_builtin() {
    assert!(matches!(
        resolve_scenario("no_such_scenario"),
        Err(ScenarioError::Unknown(_))
    ));
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let sc = builtin("example51").unwrap();
    let cfg = sc.config(Some(24), None, Some(7));
    let a = run_scenario(&sc, &cfg).unwrap().to_json();
    let b = run_scenario(&sc, &cfg).unwrap().to_json();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let c = one.install(|| run_scenario(&sc, &cfg).unwrap().to_json());
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn seed_changes_samples_but_not_verdicts() {
    let sc = builtin("synthetic_bxf").unwrap();
    let a = run_scenario(&sc, &sc.config(Some(16), None, Some(1))).unwrap();
    let b = run_scenario(&sc, &sc.config(Some(16), None, Some(2))).unwrap();
    assert_eq!(a.verdicts, b.verdicts);
    assert_ne!(a.to_json(), b.to_json());
}

#[test]
fn check_groups_restrict_the_battery() {
    let mut sc = builtin("example51").unwrap();
    sc.checks = vec!["structure".into()];
    let r = run_scenario(&sc, &sc.config(Some(8), None, None)).unwrap();
    assert!(r
        .checks
        .iter()
        .all(|c| c.id.starts_with("structure.") || c.id.starts_with("expected.")));
}
