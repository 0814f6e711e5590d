//! C ABI for the homspray engine.
//!
//! An engine is created from a scene JSON document and used through an
//! opaque handle. All functions return a status code; the last error
//! message is kept in thread-local storage and can be copied out with
//! `hs_last_error_message`. Vector and matrix buffers are caller-allocated;
//! matrices are row-major.

use homspray::error::Error;
use homspray::scene::{BuiltScene, Scene};
use libc::{c_char, size_t};
use nalgebra::DVector;
use std::cell::RefCell;
use std::ffi::CStr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes returned by every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    HsOk = 0,
    HsNullArgument = 1,
    HsParseError = 2,
    HsValidationError = 3,
    HsNumericalError = 4,
    HsBufferTooSmall = 5,
    HsPanic = 6,
}

/// Opaque engine handle wrapping a built scene.
pub struct HsEngine {
    scene: BuiltScene,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn status_for(error: &Error) -> HsStatus {
    match error {
        Error::Parse(_) | Error::Scene { .. } => HsStatus::HsParseError,
        Error::InvalidAlgebra(_)
        | Error::InadmissibleNorm(_)
        | Error::DimensionMismatch { .. }
        | Error::UnsupportedConfiguration(_) => HsStatus::HsValidationError,
        _ => HsStatus::HsNumericalError,
    }
}

fn fail(error: Error) -> HsStatus {
    let status = status_for(&error);
    set_error(error.to_string());
    status
}

fn guarded(body: impl FnOnce() -> HsStatus) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            HsStatus::HsPanic
        }
    }
}

/// # Safety
/// `y` must point to `len` doubles.
unsafe fn vector_from(y: *const f64, len: size_t) -> Option<DVector<f64>> {
    if y.is_null() {
        return None;
    }
    Some(DVector::from_column_slice(std::slice::from_raw_parts(
        y, len,
    )))
}

fn engine_ref<'a>(engine: *const HsEngine) -> Option<&'a HsEngine> {
    unsafe { engine.as_ref() }
}

/// Create an engine from a scene JSON document (see the repository README
/// for the schema). On success writes the handle to `out_engine`.
///
/// # Safety
/// `scene_json` must be a NUL-terminated string; `out_engine` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_create(
    scene_json: *const c_char,
    out_engine: *mut *mut HsEngine,
) -> HsStatus {
    guarded(|| {
        if scene_json.is_null() || out_engine.is_null() {
            set_error("null argument");
            return HsStatus::HsNullArgument;
        }
        let text = match CStr::from_ptr(scene_json).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("scene JSON is not valid UTF-8");
                return HsStatus::HsParseError;
            }
        };
        let scene = match Scene::from_json_str(text) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        match scene.build() {
            Ok(built) => {
                *out_engine = Box::into_raw(Box::new(HsEngine { scene: built }));
                HsStatus::HsOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Destroy an engine created by `hs_engine_create`. A null handle is a
/// no-op.
///
/// # Safety
/// `engine` must be null or a pointer returned by `hs_engine_create` that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_free(engine: *mut HsEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Dimension of m (the tangent model space); 0 for a null handle.
///
/// # Safety
/// `engine` must be null or a live engine handle.
#[no_mangle]
pub unsafe extern "C" fn hs_engine_dim_m(engine: *const HsEngine) -> size_t {
    engine_ref(engine).map_or(0, |e| e.scene.algebra.dim_m())
}

unsafe fn unary_vector_op(
    engine: *const HsEngine,
    y: *const f64,
    len: size_t,
    out: *mut f64,
    op: impl Fn(&HsEngine, &DVector<f64>) -> Result<DVector<f64>, Error>,
) -> HsStatus {
    let Some(engine) = engine_ref(engine) else {
        set_error("null engine");
        return HsStatus::HsNullArgument;
    };
    if out.is_null() {
        set_error("null output buffer");
        return HsStatus::HsNullArgument;
    }
    let Some(y) = vector_from(y, len) else {
        set_error("null input vector");
        return HsStatus::HsNullArgument;
    };
    match op(engine, &y) {
        Ok(result) => {
            ptr::copy_nonoverlapping(result.as_slice().as_ptr(), out, result.len());
            HsStatus::HsOk
        }
        Err(e) => fail(e),
    }
}

/// Spray vector field eta(y). `y` and `out` hold dim_m doubles.
///
/// # Safety
/// Pointers must satisfy the stated buffer contracts.
#[no_mangle]
pub unsafe extern "C" fn hs_eta(
    engine: *const HsEngine,
    y: *const f64,
    len: size_t,
    out: *mut f64,
) -> HsStatus {
    guarded(|| unary_vector_op(engine, y, len, out, |e, y| e.scene.spray.eta(y)))
}

/// Connection operator N(y, w). All buffers hold dim_m doubles.
///
/// # Safety
/// Pointers must satisfy the stated buffer contracts.
#[no_mangle]
pub unsafe extern "C" fn hs_connection(
    engine: *const HsEngine,
    y: *const f64,
    w: *const f64,
    len: size_t,
    out: *mut f64,
) -> HsStatus {
    guarded(|| {
        let Some(w) = vector_from(w, len) else {
            set_error("null input vector");
            return HsStatus::HsNullArgument;
        };
        unary_vector_op(engine, y, len, out, |e, y| {
            e.scene.spray.connection_n(y, &w)
        })
    })
}

/// Riemann curvature operator R_y as a row-major dim_m x dim_m matrix.
///
/// # Safety
/// `out` must hold dim_m * dim_m doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_riemann(
    engine: *const HsEngine,
    y: *const f64,
    len: size_t,
    out: *mut f64,
) -> HsStatus {
    guarded(|| {
        let Some(engine) = engine_ref(engine) else {
            set_error("null engine");
            return HsStatus::HsNullArgument;
        };
        if out.is_null() {
            set_error("null output buffer");
            return HsStatus::HsNullArgument;
        }
        let Some(y) = vector_from(y, len) else {
            set_error("null input vector");
            return HsStatus::HsNullArgument;
        };
        match engine.scene.spray.riemann_operator(&y) {
            Ok(r) => {
                let n = r.nrows();
                for row in 0..n {
                    for col in 0..n {
                        *out.add(row * n + col) = r[(row, col)];
                    }
                }
                HsStatus::HsOk
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn scalar_op(
    engine: *const HsEngine,
    y: *const f64,
    len: size_t,
    out: *mut f64,
    op: impl Fn(&HsEngine, &DVector<f64>) -> Result<f64, Error>,
) -> HsStatus {
    let Some(engine) = engine_ref(engine) else {
        set_error("null engine");
        return HsStatus::HsNullArgument;
    };
    if out.is_null() {
        set_error("null output buffer");
        return HsStatus::HsNullArgument;
    }
    let Some(y) = vector_from(y, len) else {
        set_error("null input vector");
        return HsStatus::HsNullArgument;
    };
    match op(engine, &y) {
        Ok(v) => {
            *out = v;
            HsStatus::HsOk
        }
        Err(e) => fail(e),
    }
}

/// S-curvature at y.
///
/// # Safety
/// Pointers must satisfy the stated buffer contracts.
#[no_mangle]
pub unsafe extern "C" fn hs_s_curvature(
    engine: *const HsEngine,
    y: *const f64,
    len: size_t,
    out: *mut f64,
) -> HsStatus {
    guarded(|| scalar_op(engine, y, len, out, |e, y| e.scene.spray.s_curvature(y)))
}

/// Flag curvature K(y, w). Finsler scenes only.
///
/// # Safety
/// Pointers must satisfy the stated buffer contracts.
#[no_mangle]
pub unsafe extern "C" fn hs_flag_curvature(
    engine: *const HsEngine,
    y: *const f64,
    w: *const f64,
    len: size_t,
    out: *mut f64,
) -> HsStatus {
    guarded(|| {
        let Some(w) = vector_from(w, len) else {
            set_error("null input vector");
            return HsStatus::HsNullArgument;
        };
        scalar_op(engine, y, len, out, |e, y| {
            e.scene.spray.flag_curvature(y, &w)
        })
    })
}

/// Landsberg curvature L_y(w,w,w). Finsler scenes only.
///
/// # Safety
/// Pointers must satisfy the stated buffer contracts.
#[no_mangle]
pub unsafe extern "C" fn hs_landsberg(
    engine: *const HsEngine,
    y: *const f64,
    w: *const f64,
    len: size_t,
    out: *mut f64,
) -> HsStatus {
    guarded(|| {
        let Some(w) = vector_from(w, len) else {
            set_error("null input vector");
            return HsStatus::HsNullArgument;
        };
        scalar_op(engine, y, len, out, |e, y| e.scene.spray.landsberg(y, &w))
    })
}

/// Integrate the geodesic from y0 with the scene's integrator at step dt.
/// Writes up to `capacity` samples: times into `out_times`, states row by
/// row into `out_states` (capacity * dim_m doubles). The number of samples
/// in the full trajectory is stored in `out_samples`; if it exceeds
/// `capacity` the buffers are untouched and the call returns
/// `HsBufferTooSmall` so the caller can retry with a larger allocation.
///
/// # Safety
/// Pointers must satisfy the stated buffer contracts.
#[no_mangle]
pub unsafe extern "C" fn hs_geodesic(
    engine: *const HsEngine,
    y0: *const f64,
    len: size_t,
    t_end: f64,
    dt: f64,
    out_times: *mut f64,
    out_states: *mut f64,
    capacity: size_t,
    out_samples: *mut size_t,
) -> HsStatus {
    guarded(|| {
        let Some(engine) = engine_ref(engine) else {
            set_error("null engine");
            return HsStatus::HsNullArgument;
        };
        if out_times.is_null() || out_states.is_null() || out_samples.is_null() {
            set_error("null output buffer");
            return HsStatus::HsNullArgument;
        }
        let Some(y0) = vector_from(y0, len) else {
            set_error("null input vector");
            return HsStatus::HsNullArgument;
        };
        let mut config = engine.scene.integrator;
        config.dt = dt;
        let traj = match homspray::integrate_geodesic(&engine.scene.spray, &y0, t_end, config) {
            Ok(t) => t,
            Err(e) => return fail(e),
        };
        *out_samples = traj.times.len();
        if traj.times.len() > capacity {
            set_error(format!(
                "trajectory has {} samples, buffer capacity is {}",
                traj.times.len(),
                capacity
            ));
            return HsStatus::HsBufferTooSmall;
        }
        let n = traj.dim();
        for (k, (t, y)) in traj.times.iter().zip(&traj.states).enumerate() {
            *out_times.add(k) = *t;
            for i in 0..n {
                *out_states.add(k * n + i) = y[i];
            }
        }
        HsStatus::HsOk
    })
}

/// Copy the last error message of this thread into `buffer` (NUL
/// terminated, truncated to `capacity`). Returns the full message length.
///
/// # Safety
/// `buffer` must hold `capacity` bytes, or be null to query the length.
#[no_mangle]
pub unsafe extern "C" fn hs_last_error_message(buffer: *mut c_char, capacity: size_t) -> size_t {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let bytes = message.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buffer, n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}
