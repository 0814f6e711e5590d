//! End-to-end tests of the homspray binary: exit codes, output formats, and
//! byte-level determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn scene_path(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .join("scenes")
        .join(name);
    root.to_string_lossy().into_owned()
}

fn homspray(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homspray"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn homspray_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homspray"))
        .env("RAYON_NUM_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn validate_passes_on_sphere() {
    let out = homspray(&["validate", "--scene", &scene_path("sphere.json")]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"pass\":true"));
}

#[test]
fn validate_all_shipped_scenes() {
    for scene in [
        "sphere.json",
        "su2_biinvariant.json",
        "euler_top.json",
        "randers_heisenberg.json",
        "canonical_sphere.json",
        "direct_euler_top.json",
        "inline_su2.json",
    ] {
        let out = homspray(&["validate", "--scene", &scene_path(scene)]);
        assert!(
            out.status.success(),
            "{scene}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn parse_error_exits_3() {
    let dir = std::env::temp_dir().join("homspray_bad_scene.json");
    std::fs::write(&dir, "{not json").unwrap();
    let out = homspray(&["validate", "--scene", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn failing_validation_exits_1() {
    // the covector breaks the rotational symmetry the isotropy demands
    let path = std::env::temp_dir().join("homspray_noninvariant.json");
    std::fs::write(
        &path,
        r#"{
            "algebra": {"preset": "su2_u1"},
            "metric": {"type": "randers", "a": [[1.0, 0.0], [0.0, 1.0]],
                       "b": [0.3, 0.0]}
        }"#,
    )
    .unwrap();
    let out = homspray(&["validate", "--scene", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"pass\":false"));
    assert!(text.contains("ad_h_invariance"));
}

#[test]
fn missing_scene_exits_3() {
    let out = homspray(&["eta", "--scene", "/nonexistent.json", "--y", "1,0"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn validate_warns_on_nonunimodular_isotropy() {
    // h acts on m as a dilation: reductive, but no invariant measure
    let path = std::env::temp_dir().join("homspray_dilation.json");
    std::fs::write(
        &path,
        r#"{
            "algebra": {
                "dim_g": 3, "dim_m": 2,
                "structure_constants": [[2, 0, 0, 1.0], [2, 1, 1, 1.0]]
            },
            "metric": {"type": "direct", "eta": "zero"}
        }"#,
    )
    .unwrap();
    let out = homspray(&["validate", "--scene", path.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"warning\":true"), "{text}");
}

#[test]
fn degenerate_flag_exits_2() {
    let out = homspray(&[
        "scan",
        "--scene",
        &scene_path("canonical_sphere.json"),
        "--y",
        "1,0",
        "--grid",
        "4",
    ]);
    // direct scene has no Finsler metric: unsupported configuration
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_2() {
    // eta is undefined at the cone tip
    let out = homspray(&["eta", "--scene", &scene_path("sphere.json"), "--y", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("y = 0"));
}

#[test]
fn eta_reports_euler_field() {
    let out = homspray(&[
        "eta",
        "--scene",
        &scene_path("euler_top.json"),
        "--y",
        "1,0.5,-0.25",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"eta\""));
    assert!(text.contains("\"homogeneity_residuals\""));
}

#[test]
fn curvature_reports_term_breakdown() {
    let out = homspray(&[
        "curvature",
        "--scene",
        &scene_path("sphere.json"),
        "--y",
        "1,0",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "\"isotropy\"",
        "\"spray_derivative\"",
        "\"nested_connection\"",
        "\"connection_of_bracket\"",
        "\"bracket_of_connection\"",
        "\"flag_curvatures\"",
        "\"riemann_applied_to_y\"",
    ] {
        assert!(text.contains(key), "missing {key} in {text}");
    }
    // sphere flag curvature is 1
    assert!(text.contains("1.0000000000"));
}

#[test]
fn geodesic_csv_has_conserved_columns() {
    let out = homspray(&[
        "geodesic",
        "--scene",
        &scene_path("euler_top.json"),
        "--y0",
        "1,0.01,0",
        "--t-end",
        "0.1",
        "--dt",
        "0.01",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "t,y1,y2,y3,F,energy,casimir");
    assert_eq!(text.lines().count(), 12); // header + 11 samples
}

#[test]
fn transport_runs_both_modes() {
    for mode in ["linear", "nonlinear"] {
        let out = homspray(&[
            "transport",
            "--scene",
            &scene_path("su2_biinvariant.json"),
            "--mode",
            mode,
            "--base-velocity",
            "0.7,-0.2,0.5",
            "--w0",
            "0,1,0",
            "--t-end",
            "0.5",
            "--dt",
            "0.01",
        ]);
        assert!(out.status.success(), "{mode}");
        let text = String::from_utf8(out.stdout).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("t,y1,y2,y3"));
        // the metric pairing against the base velocity rides along in
        // linear mode
        assert_eq!(header.ends_with(",g_y_w"), mode == "linear");
    }
}

#[test]
fn transport_along_geodesic_base() {
    let out = homspray(&[
        "transport",
        "--scene",
        &scene_path("euler_top.json"),
        "--mode",
        "linear",
        "--base-geodesic",
        "1,0.3,-0.2",
        "--w0",
        "0,1,0",
        "--t-end",
        "0.5",
        "--dt",
        "0.01",
    ]);
    assert!(out.status.success());
}

#[test]
fn scan_is_deterministic_across_thread_counts() {
    let args = [
        "scan",
        "--scene",
        &scene_path("euler_top.json"),
        "--y",
        "1,0.3,-0.2",
        "--grid",
        "24",
        "--seed",
        "7",
    ];
    let single = homspray_with_threads(&args, "1");
    let multi = homspray_with_threads(&args, "4");
    assert!(single.status.success());
    assert_eq!(
        single.stdout, multi.stdout,
        "scan output depends on thread count"
    );
    let text = String::from_utf8(single.stdout).unwrap();
    assert_eq!(text.lines().count(), 25);
    assert!(text.lines().next().unwrap().starts_with("index,w1"));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "curvature",
        "--scene",
        &scene_path("randers_heisenberg.json"),
        "--y",
        "0.8,-0.5,0.3",
        "--seed",
        "11",
    ];
    let a = homspray(&args);
    let b = homspray(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn oracle_compare_sphere_passes() {
    let out = homspray(&[
        "oracle-compare",
        "--scene",
        &scene_path("sphere.json"),
        "--samples",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"pass\":true"));
    assert!(text.contains("compare_eta"));
    assert!(text.contains("linear_transport"));
}

#[test]
fn oracle_compare_csv_format() {
    let out = homspray(&[
        "oracle-compare",
        "--scene",
        &scene_path("sphere.json"),
        "--samples",
        "2",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("check,sample,residual,tolerance,pass"));
}

#[test]
fn out_file_writes_report() {
    let path = std::env::temp_dir().join("homspray_eta_out.json");
    let _ = std::fs::remove_file(&path);
    let out = homspray(&[
        "eta",
        "--scene",
        &scene_path("sphere.json"),
        "--y",
        "1,0",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"eta\""));
}
