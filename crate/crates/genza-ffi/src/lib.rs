//! C ABI over the performance model: opaque handles, status codes, and
//! JSON-in/JSON-out entry points.
//!
//! Ownership rules: every `*_from_json` constructor transfers ownership of the
//! returned handle to the caller, who must release it with the matching
//! `*_free`. Strings returned through `char **` out-params are released with
//! [`genza_string_free`]. All functions tolerate null pointers and report
//! failures through [`GenzaStatus`]; the message for the most recent failure
//! on the calling thread is available via [`genza_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use genza::platform::Platform;
use genza::workload::{Workload, WorkloadSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenzaStatus {
    /// Success.
    Ok = 0,
    /// Rejected input: malformed JSON, unknown name, or invalid field value.
    ValidationError = 1,
    /// Valid input that the model cannot satisfy (placement, out of memory).
    ModelError = 2,
    /// A required pointer argument was null.
    NullArgument = 3,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 4,
    /// Internal failure; the library state is still consistent.
    InternalError = 5,
}

/// Opaque accelerator-platform handle.
pub struct GenzaPlatform(Platform);

/// Opaque workload handle (model + use case + precision + mapping).
pub struct GenzaWorkload(Workload);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(e: &genza::Error) -> GenzaStatus {
    match e.exit_code() {
        2 => GenzaStatus::ModelError,
        _ => GenzaStatus::ValidationError,
    }
}

/// Runs `f` with panics fenced off from the C caller.
fn guarded<F: FnOnce() -> GenzaStatus>(f: F) -> GenzaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            GenzaStatus::InternalError
        }
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, GenzaStatus> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(GenzaStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        GenzaStatus::InvalidUtf8
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> GenzaStatus {
    let c = match CString::new(s) {
        Ok(c) => c,
        Err(_) => {
            set_last_error("result contained an interior NUL byte");
            return GenzaStatus::InternalError;
        }
    };
    unsafe { *out = c.into_raw() };
    GenzaStatus::Ok
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn genza_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn genza_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Build a platform from a preset name or a platform JSON document.
///
/// # Safety
/// `spec` must be a valid NUL-terminated string; `out` must be a valid,
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn genza_platform_from_json(
    spec: *const c_char,
    out: *mut *mut GenzaPlatform,
) -> GenzaStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out-param");
            return GenzaStatus::NullArgument;
        }
        let text = match read_str(spec) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let parsed = if text.trim_start().starts_with('{') {
            Platform::from_json_str(text)
        } else {
            genza::platform::load_platform(text)
        };
        match parsed {
            Ok(p) => {
                *out = Box::into_raw(Box::new(GenzaPlatform(p)));
                GenzaStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Release a platform handle. Null is a no-op.
///
/// # Safety
/// `p` must be null or a pointer returned by `genza_platform_from_json`
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn genza_platform_free(p: *mut GenzaPlatform) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Build a workload from a workload JSON document (model and use case may be
/// catalog names or inline objects).
///
/// # Safety
/// `spec` must be a valid NUL-terminated string; `out` must be a valid,
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn genza_workload_from_json(
    spec: *const c_char,
    out: *mut *mut GenzaWorkload,
) -> GenzaStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("null out-param");
            return GenzaStatus::NullArgument;
        }
        let text = match read_str(spec) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match WorkloadSpec::from_json_str(text).and_then(|s| s.resolve()) {
            Ok(w) => {
                *out = Box::into_raw(Box::new(GenzaWorkload(w)));
                GenzaStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Release a workload handle. Null is a no-op.
///
/// # Safety
/// `w` must be null or a pointer returned by `genza_workload_from_json`
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn genza_workload_free(w: *mut GenzaWorkload) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Run the full analysis and return the versioned JSON report.
///
/// # Safety
/// `w` and `p` must be live handles from this library; `out_json` must be a
/// valid, writable pointer.
#[no_mangle]
pub unsafe extern "C" fn genza_analyze(
    w: *const GenzaWorkload,
    p: *const GenzaPlatform,
    out_json: *mut *mut c_char,
) -> GenzaStatus {
    guarded(|| {
        if w.is_null() || p.is_null() || out_json.is_null() {
            set_last_error("null argument");
            return GenzaStatus::NullArgument;
        }
        match genza::analyzer::analyze(&(*w).0, &(*p).0) {
            Ok(metrics) => give_string(genza::report::to_json("analyze", &metrics), out_json),
            Err(e) => {
                set_last_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Compute SLO-derived platform requirements and return the versioned JSON
/// report. `compute_eff` in (0, 1] derates peak compute; pass 0 for the
/// default.
///
/// # Safety
/// `w` must be a live handle from this library; `out_json` must be a valid,
/// writable pointer.
#[no_mangle]
pub unsafe extern "C" fn genza_requirements(
    w: *const GenzaWorkload,
    compute_eff: f64,
    out_json: *mut *mut c_char,
) -> GenzaStatus {
    guarded(|| {
        if w.is_null() || out_json.is_null() {
            set_last_error("null argument");
            return GenzaStatus::NullArgument;
        }
        let eff = if compute_eff == 0.0 {
            genza::requirements::DEFAULT_COMPUTE_EFF
        } else {
            compute_eff
        };
        match genza::requirements::requirement_report(&(*w).0, eff) {
            Ok(report) => give_string(genza::report::to_json("require", &report), out_json),
            Err(e) => {
                set_last_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Release a string returned through a `char **` out-param. Null is a no-op.
///
/// # Safety
/// `s` must be null or a pointer returned by this library that has not been
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn genza_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
