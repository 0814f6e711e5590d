//! Exercise the C ABI through the exported extern functions.

use homspray_ffi::*;
use std::ffi::CString;
use std::ptr;

const EULER_TOP: &str = r#"{
    "algebra": {"preset": "su2"},
    "metric": {"type": "euclidean",
               "a": [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]}
}"#;

const SPHERE: &str = r#"{
    "algebra": {"preset": "su2_u1"},
    "metric": {"type": "euclidean", "a": [[1.0, 0.0], [0.0, 1.0]]}
}"#;

fn create(scene: &str) -> *mut HsEngine {
    let json = CString::new(scene).unwrap();
    let mut engine: *mut HsEngine = ptr::null_mut();
    let status = unsafe { hs_engine_create(json.as_ptr(), &mut engine) };
    assert_eq!(status, HsStatus::HsOk);
    assert!(!engine.is_null());
    engine
}

fn last_error() -> String {
    let mut buf = vec![0i8; 256];
    let len = unsafe { hs_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..len.min(255)].iter().map(|&b| b as u8).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

#[test]
fn engine_lifecycle_and_eta() {
    let engine = create(EULER_TOP);
    assert_eq!(unsafe { hs_engine_dim_m(engine) }, 3);

    let y = [1.0, 0.5, -0.25];
    let mut eta = [0.0; 3];
    let status = unsafe { hs_eta(engine, y.as_ptr(), 3, eta.as_mut_ptr()) };
    assert_eq!(status, HsStatus::HsOk);
    // classical Euler field (y x Iy)_i / I_i with I = diag(1,2,3)
    let iy = [y[0], 2.0 * y[1], 3.0 * y[2]];
    let expected = [
        (y[1] * iy[2] - y[2] * iy[1]) / 1.0,
        (y[2] * iy[0] - y[0] * iy[2]) / 2.0,
        (y[0] * iy[1] - y[1] * iy[0]) / 3.0,
    ];
    for i in 0..3 {
        assert!((eta[i] - expected[i]).abs() < 1e-12);
    }
    unsafe { hs_engine_free(engine) };
}

#[test]
fn riemann_and_flag_on_sphere() {
    let engine = create(SPHERE);
    let y = [1.0, 0.0];
    let mut r = [0.0; 4];
    assert_eq!(
        unsafe { hs_riemann(engine, y.as_ptr(), 2, r.as_mut_ptr()) },
        HsStatus::HsOk
    );
    // R_{e1} = diag(0, 1) for the unit sphere
    assert!(r[0].abs() < 1e-10 && (r[3] - 1.0).abs() < 1e-10);

    let w = [0.0, 1.0];
    let mut k = 0.0;
    assert_eq!(
        unsafe { hs_flag_curvature(engine, y.as_ptr(), w.as_ptr(), 2, &mut k) },
        HsStatus::HsOk
    );
    assert!((k - 1.0).abs() < 1e-10);

    let mut s = f64::NAN;
    assert_eq!(
        unsafe { hs_s_curvature(engine, y.as_ptr(), 2, &mut s) },
        HsStatus::HsOk
    );
    assert!(s.abs() < 1e-12);

    let mut l = f64::NAN;
    assert_eq!(
        unsafe { hs_landsberg(engine, y.as_ptr(), w.as_ptr(), 2, &mut l) },
        HsStatus::HsOk
    );
    assert!(l.abs() < 1e-12);

    let mut n = [0.0; 2];
    assert_eq!(
        unsafe { hs_connection(engine, y.as_ptr(), w.as_ptr(), 2, n.as_mut_ptr()) },
        HsStatus::HsOk
    );
    assert!(n[0].abs() < 1e-12 && n[1].abs() < 1e-12);

    unsafe { hs_engine_free(engine) };
}

#[test]
fn geodesic_buffer_protocol() {
    let engine = create(EULER_TOP);
    let y0 = [1.0, 0.01, 0.0];
    let mut samples: usize = 0;

    // deliberately undersized: expect the needed count back
    let mut times = [0.0; 3];
    let mut states = [0.0; 9];
    let status = unsafe {
        hs_geodesic(
            engine,
            y0.as_ptr(),
            3,
            0.1,
            0.01,
            times.as_mut_ptr(),
            states.as_mut_ptr(),
            3,
            &mut samples,
        )
    };
    assert_eq!(status, HsStatus::HsBufferTooSmall);
    assert_eq!(samples, 11);
    assert!(last_error().contains("capacity"));

    let mut times = vec![0.0; samples];
    let mut states = vec![0.0; samples * 3];
    let status = unsafe {
        hs_geodesic(
            engine,
            y0.as_ptr(),
            3,
            0.1,
            0.01,
            times.as_mut_ptr(),
            states.as_mut_ptr(),
            samples,
            &mut samples,
        )
    };
    assert_eq!(status, HsStatus::HsOk);
    assert_eq!(times[0], 0.0);
    assert!((times[10] - 0.1).abs() < 1e-12);
    // energy conserved across the window
    let energy = |y: &[f64]| 0.5 * (y[0] * y[0] + 2.0 * y[1] * y[1] + 3.0 * y[2] * y[2]);
    let e0 = energy(&states[0..3]);
    let e1 = energy(&states[30..33]);
    assert!((e0 - e1).abs() < 1e-10);
    unsafe { hs_engine_free(engine) };
}

#[test]
fn error_paths_report_status_and_message() {
    // parse error
    let bad = CString::new("{ not json").unwrap();
    let mut engine: *mut HsEngine = ptr::null_mut();
    assert_eq!(
        unsafe { hs_engine_create(bad.as_ptr(), &mut engine) },
        HsStatus::HsParseError
    );
    assert!(engine.is_null());
    assert!(!last_error().is_empty());

    // validation error: inadmissible Randers covector
    let inadmissible = CString::new(
        r#"{
            "algebra": {"preset": "heisenberg3"},
            "metric": {"type": "randers",
                       "a": [[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]],
                       "b": [0.0, 0.0, 1.5]}
        }"#,
    )
    .unwrap();
    assert_eq!(
        unsafe { hs_engine_create(inadmissible.as_ptr(), &mut engine) },
        HsStatus::HsValidationError
    );

    // null arguments
    assert_eq!(
        unsafe { hs_engine_create(ptr::null(), &mut engine) },
        HsStatus::HsNullArgument
    );
    let live = create(SPHERE);
    let y = [1.0, 0.0];
    assert_eq!(
        unsafe { hs_eta(live, ptr::null(), 2, std::ptr::null_mut()) },
        HsStatus::HsNullArgument
    );

    // numerical error: eta at the cone tip
    let zero = [0.0, 0.0];
    let mut out = [0.0; 2];
    assert_eq!(
        unsafe { hs_eta(live, zero.as_ptr(), 2, out.as_mut_ptr()) },
        HsStatus::HsNumericalError
    );
    assert!(last_error().contains("y = 0"));

    // degenerate flag
    let mut k = 0.0;
    assert_eq!(
        unsafe { hs_flag_curvature(live, y.as_ptr(), y.as_ptr(), 2, &mut k) },
        HsStatus::HsNumericalError
    );
    unsafe { hs_engine_free(live) };
    unsafe { hs_engine_free(ptr::null_mut()) };
}

#[test]
fn direct_scene_rejects_finsler_only_calls() {
    let direct = CString::new(
        r#"{
            "algebra": {"preset": "su2_u1"},
            "metric": {"type": "direct", "eta": "zero"}
        }"#,
    )
    .unwrap();
    let mut engine: *mut HsEngine = ptr::null_mut();
    assert_eq!(
        unsafe { hs_engine_create(direct.as_ptr(), &mut engine) },
        HsStatus::HsOk
    );
    let y = [1.0, 0.0];
    let w = [0.0, 1.0];
    let mut l = 0.0;
    assert_eq!(
        unsafe { hs_landsberg(engine, y.as_ptr(), w.as_ptr(), 2, &mut l) },
        HsStatus::HsValidationError
    );
    assert!(last_error().contains("Finsler"));
    unsafe { hs_engine_free(engine) };
}
