use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn weilkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weilkit")).args(args).output().expect("binary runs")
}

fn fx(name: &str) -> String {
    fixture(name).display().to_string()
}

fn result(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).expect("JSON on stdout");
    doc["result"].clone()
}

fn error_code(out: &Output) -> (i32, String) {
    let doc: Value = serde_json::from_slice(&out.stderr).expect("JSON error on stderr");
    (out.status.code().unwrap(), doc["error"]["code"].as_str().unwrap().to_string())
}

#[test]
fn algebra_echoes_basis_and_order() {
    let r = result(&weilkit(&["algebra", "--spec", &fx("e3.json")]));
    assert_eq!(r["basis"], serde_json::json!(["1", "e", "e^2"]));
    assert_eq!(r["k"], 2);
}

#[test]
fn transition_of_the_square_chart_plane() {
    let out = weilkit(&["transition", "--manifold", &fx("r2.json"), "--algebra", &fx("e3.json"), "--point", &fx("p.json")]);
    let r = result(&out);
    // (x0^2, 2 x0 x1, 2 x0 x2 + x1^2, y0 + x0, y1 + x1, y2 + x2) at (1, 4, 10, 1, 3, 4)
    assert_eq!(r["tuple"], serde_json::json!([1.0, 8.0, 36.0, 2.0, 7.0, 14.0]));
    assert_eq!(r["to"]["chart"], "C2");
}

#[test]
fn reflection_scan_finds_two_fixed_fibres() {
    let r = result(&weilkit(&["fix", "--scenario", &fx("reflect.json")]));
    let clusters = r["clusters"].as_array().unwrap();
    assert_eq!(clusters.len(), 2);
    let bases: Vec<f64> = clusters.iter().map(|c| c["point"]["coeffs"][0].as_f64().unwrap()).collect();
    let nil: Vec<f64> = clusters.iter().map(|c| c["point"]["coeffs"][1].as_f64().unwrap()).collect();
    assert_eq!(bases, [0.0, std::f64::consts::PI]);
    assert_eq!(nil, [0.0, 0.0]);
}

#[test]
fn rotation_scan_is_empty_and_orbit_wanders() {
    let r = result(&weilkit(&["fix", "--scenario", &fx("rotate.json")]));
    assert_eq!(r["fixed"], 0);
    let r = result(&weilkit(&["orbit", "--scenario", &fx("rotate.json")]));
    assert_eq!(r["verdict"], "wandering");
    assert_eq!(r["iterations"], 20);
}

#[test]
fn rotation_distances_to_the_identity() {
    let c0 = result(&weilkit(&["c0", "--scenario", &fx("rotate.json")]));
    let gap = result(&weilkit(&["pwt", "--scenario", &fx("rotate.json")]));
    assert!((c0["c0"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((gap["gap"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn distance_between_charts() {
    let r = result(&weilkit(&["dist", "--scenario", &fx("dist.json")]));
    assert_eq!(r["base"], 0.0);
    assert_eq!(r["mode"], "probe");
    let d = r["distance"].as_f64().unwrap();
    assert!(d > 0.0 && d <= 2.0 + 1e-12, "{d}");
}

#[test]
fn lifted_path_hits_its_endpoints() {
    let r = result(&weilkit(&["lift-path", "--scenario", &fx("path.json")]));
    let samples = r["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 11);
    assert_eq!(samples[0]["point"]["coeffs"], serde_json::json!([0.5, 1.0]));
    assert_eq!(samples[10]["point"]["coeffs"], serde_json::json!([2.0, -0.5]));
    assert!(r["leibniz_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn betti_of_the_seven_vertex_torus() {
    let r = result(&weilkit(&["betti", "--spec", &fx("torus.json")]));
    assert_eq!(r["betti"], serde_json::json!([1, 2, 1]));
    assert_eq!(r["euler"], 0);
}

#[test]
fn bundle_check_on_the_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("s2.json");
    std::fs::write(&m, r#"{"builtin": "S2"}"#).unwrap();
    let r = result(&weilkit(&["bundle-check", "--manifold", m.to_str().unwrap(), "--algebra", &fx("a.json")]));
    assert_eq!(r["bundle_betti"], serde_json::json!([1, 0, 1]));
    assert_eq!(r["matches_expected"], true);
}

#[test]
fn eval_partials() {
    let r = result(&weilkit(&["eval", "--scenario", &fx("eval.json")]));
    assert_eq!(r["partials"]["x"], 2.0);
    assert_eq!(r["partials"]["x*y"], 1.0);
}

#[test]
fn lift_map_of_a_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("map.json");
    std::fs::write(
        &s,
        r#"{"map": {"from": "S1", "to": "S1", "components": ["t + 0.5"], "chart": "U"},
            "algebra": {"generators": ["e"], "relations": ["e^2"]},
            "points": [{"chart": "U", "acoords": [{"1": 0.3, "e": 1.0}]}]}"#,
    )
    .unwrap();
    let r = result(&weilkit(&["lift-map", "--scenario", s.to_str().unwrap()]));
    let c = &r["images"][0]["image"]["coeffs"];
    assert!((c[0].as_f64().unwrap() - 0.8).abs() < 1e-15);
    assert_eq!(c[1], 1.0);
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["fix", "--scenario", &fx("reflect.json"), "--seed", "9"];
    let (a, b) = (weilkit(&args), weilkit(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn manifest_and_out_files() {
    let dir = tempfile::tempdir().unwrap();
    let (out, man) = (dir.path().join("out.json"), dir.path().join("manifest.json"));
    let status = weilkit(&[
        "betti",
        "--spec",
        &fx("torus.json"),
        "--out",
        out.to_str().unwrap(),
        "--manifest",
        man.to_str().unwrap(),
        "--tol",
        "1e-9",
    ]);
    assert!(status.status.success());
    assert!(status.stdout.is_empty());
    let doc: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["run"]["tolerances"]["tol"], 1e-9);
    assert_eq!(doc["run"]["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let m: Value = serde_json::from_slice(&std::fs::read(&man).unwrap()).unwrap();
    assert!(m["wall_time_ms"].is_u64());
    assert_eq!(m["command"], "betti");
}

#[test]
fn errors_have_codes_and_exit_one() {
    let (code, name) = error_code(&weilkit(&["eval", "--scenario", &fx("bad_expr.json")]));
    assert_eq!((code, name.as_str()), (1, "syntax_error"));
    let out = weilkit(&["eval", "--scenario", &fx("bad_expr.json")]);
    let doc: Value = serde_json::from_slice(&out.stderr).unwrap();
    let message = doc["error"]["message"].as_str().unwrap();
    assert!(message.contains("sin(x\n") && message.ends_with('^'), "{message}");

    assert_eq!(error_code(&weilkit(&["frobnicate"])), (1, "usage_error".into()));
    assert_eq!(error_code(&weilkit(&["algebra"])), (1, "usage_error".into()));
    assert_eq!(error_code(&weilkit(&["algebra", "--spec", "/nonexistent.json"])), (1, "io_error".into()));
    assert_eq!(error_code(&weilkit(&["algebra", "--spec", &fx("torus.json")])), (1, "invalid_input".into()));
    assert_eq!(error_code(&weilkit(&["betti", "--spec", &fx("p.json")])), (1, "invalid_input".into()));
}

#[test]
fn domain_errors_carry_core_codes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    std::fs::write(&a, r#"{"generators": ["e", "f"], "relations": ["e^2"]}"#).unwrap();
    assert_eq!(error_code(&weilkit(&["algebra", "--spec", a.to_str().unwrap()])), (1, "non_nilpotent".into()));
    let m = dir.path().join("m.json");
    std::fs::write(&m, r#""RP3""#).unwrap();
    assert_eq!(
        error_code(&weilkit(&["bundle-check", "--manifold", m.to_str().unwrap(), "--algebra", &fx("a.json")])),
        (1, "no_triangulation".into())
    );
}

#[test]
fn help_exits_zero() {
    let out = weilkit(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("bundle-check"));
}
