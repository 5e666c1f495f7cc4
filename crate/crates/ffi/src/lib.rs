//! C ABI for the swarm-federated learning simulator.
//!
//! Handles are opaque pointers created and freed by this library. Every
//! fallible call returns an [`SfdlStatus`]; on failure the thread-local error
//! message is retrievable through [`sfdl_last_error_message`]. Strings
//! returned through out-pointers are owned by the caller and must be released
//! with [`sfdl_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::str::FromStr;

use iov_sfdl::credibility::{credibility, CombinationRule, CredibilityState};
use iov_sfdl::metrics::{metric_loss, metric_prediction_accuracy, metric_prediction_error};
use iov_sfdl::sim::{run_experiment, write_report, Scenario, SimConfig};
use iov_sfdl::{Framework, SfdlError};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfdlStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    InvalidInput = 3,
    Config = 4,
    Schema = 5,
    Io = 6,
    Numeric = 7,
    Parse = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: SfdlStatus, message: impl Into<Vec<u8>>) -> SfdlStatus {
    let message = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
    status
}

fn fail_with(err: SfdlError) -> SfdlStatus {
    let status = match &err {
        SfdlError::InvalidInput(_) => SfdlStatus::InvalidInput,
        SfdlError::Config(_) => SfdlStatus::Config,
        SfdlError::Schema(_) => SfdlStatus::Schema,
        SfdlError::Io(_) => SfdlStatus::Io,
        SfdlError::NonFinite { .. } => SfdlStatus::Numeric,
        SfdlError::Parse(_) => SfdlStatus::Parse,
        SfdlError::Round { source, .. } => return fail_with_nested(source, err.to_string()),
    };
    fail(status, err.to_string())
}

fn fail_with_nested(source: &SfdlError, message: String) -> SfdlStatus {
    let status = match source {
        SfdlError::InvalidInput(_) => SfdlStatus::InvalidInput,
        SfdlError::Config(_) => SfdlStatus::Config,
        SfdlError::Schema(_) => SfdlStatus::Schema,
        SfdlError::Io(_) => SfdlStatus::Io,
        SfdlError::NonFinite { .. } => SfdlStatus::Numeric,
        SfdlError::Parse(_) => SfdlStatus::Parse,
        SfdlError::Round { source, .. } => return fail_with_nested(source, message),
    };
    fail(status, message)
}

/// Copy the most recent error message into `buf` (NUL terminated, truncated
/// to `len`). Returns the full message length in bytes, excluding the NUL.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (the call then only
/// reports the length).
#[no_mangle]
pub unsafe extern "C" fn sfdl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        let bytes = message.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sfdl_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Release a string allocated by this library.
///
/// # Safety
/// `s` must have been returned through one of this library's out-pointers
/// and not freed before. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sfdl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn arg_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, SfdlStatus> {
    if ptr.is_null() {
        return Err(fail(SfdlStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(SfdlStatus::Utf8, format!("{name} is not valid UTF-8")))
}

fn give_string(out: *mut *mut c_char, value: String) -> SfdlStatus {
    match CString::new(value) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            SfdlStatus::Ok
        }
        Err(_) => fail(SfdlStatus::Utf8, "string contains interior NUL"),
    }
}

/// Opaque scenario handle.
pub struct SfdlScenario {
    inner: Scenario,
}

/// Parse and validate a scenario from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sfdl_scenario_from_json(
    json: *const c_char,
    out: *mut *mut SfdlScenario,
) -> SfdlStatus {
    if out.is_null() {
        return fail(SfdlStatus::NullPointer, "out is null");
    }
    let json = match arg_str(json, "json") {
        Ok(s) => s,
        Err(status) => return status,
    };
    match Scenario::from_json(json) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(SfdlScenario { inner }));
            SfdlStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// Build one of the named density presets: "high", "medium", or "low".
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sfdl_scenario_preset(
    name: *const c_char,
    out: *mut *mut SfdlScenario,
) -> SfdlStatus {
    if out.is_null() {
        return fail(SfdlStatus::NullPointer, "out is null");
    }
    let name = match arg_str(name, "name") {
        Ok(s) => s,
        Err(status) => return status,
    };
    match Scenario::preset(name) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(SfdlScenario { inner }));
            SfdlStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// # Safety
/// `scenario` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sfdl_scenario_set_seed(
    scenario: *mut SfdlScenario,
    seed: u64,
) -> SfdlStatus {
    match scenario.as_mut() {
        Some(s) => {
            s.inner.seed = seed;
            SfdlStatus::Ok
        }
        None => fail(SfdlStatus::NullPointer, "scenario is null"),
    }
}

/// # Safety
/// `scenario` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sfdl_scenario_set_rounds(
    scenario: *mut SfdlScenario,
    rounds: u32,
) -> SfdlStatus {
    match scenario.as_mut() {
        Some(s) if rounds >= 1 => {
            s.inner.rounds = rounds as usize;
            SfdlStatus::Ok
        }
        Some(_) => fail(SfdlStatus::InvalidInput, "rounds must be >= 1"),
        None => fail(SfdlStatus::NullPointer, "scenario is null"),
    }
}

/// Serialize the scenario back to JSON. The caller frees the string.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sfdl_scenario_to_json(
    scenario: *const SfdlScenario,
    out: *mut *mut c_char,
) -> SfdlStatus {
    if out.is_null() {
        return fail(SfdlStatus::NullPointer, "out is null");
    }
    match scenario.as_ref() {
        Some(s) => give_string(out, s.inner.to_json()),
        None => fail(SfdlStatus::NullPointer, "scenario is null"),
    }
}

/// # Safety
/// `scenario` must be a handle from this library, not yet freed. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn sfdl_scenario_free(scenario: *mut SfdlScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Run an experiment. `frameworks_csv` selects frameworks by tag, comma
/// separated (null or empty runs all three). When `out_dir` is non-null, the
/// per-framework checkpoint streams and summary are written there. When
/// `summary_json_out` is non-null it receives the summary document.
///
/// # Safety
/// `scenario` must be a live handle; string arguments must be NUL-terminated
/// when non-null; `summary_json_out`, when non-null, must be valid to write.
#[no_mangle]
pub unsafe extern "C" fn sfdl_run_experiment(
    scenario: *const SfdlScenario,
    frameworks_csv: *const c_char,
    out_dir: *const c_char,
    summary_json_out: *mut *mut c_char,
) -> SfdlStatus {
    let scenario = match scenario.as_ref() {
        Some(s) => &s.inner,
        None => return fail(SfdlStatus::NullPointer, "scenario is null"),
    };
    let frameworks = if frameworks_csv.is_null() {
        Framework::ALL.to_vec()
    } else {
        let csv = match arg_str(frameworks_csv, "frameworks_csv") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if csv.trim().is_empty() {
            Framework::ALL.to_vec()
        } else {
            let mut parsed = Vec::new();
            for tag in csv.split(',') {
                match Framework::from_str(tag.trim()) {
                    Ok(fw) => parsed.push(fw),
                    Err(e) => return fail_with(e),
                }
            }
            parsed
        }
    };

    let report = match run_experiment(scenario.clone(), &frameworks, SimConfig::default()) {
        Ok(r) => r,
        Err(e) => return fail_with(e),
    };
    if !out_dir.is_null() {
        let dir = match arg_str(out_dir, "out_dir") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if let Err(e) = write_report(&report, Path::new(dir)) {
            return fail_with(e);
        }
    }
    if !summary_json_out.is_null() {
        let json = match serde_json_string(&report.summary) {
            Ok(j) => j,
            Err(status) => return status,
        };
        return give_string(summary_json_out, json);
    }
    SfdlStatus::Ok
}

fn serde_json_string<T: serde::Serialize>(value: &T) -> Result<String, SfdlStatus> {
    serde_json::to_string_pretty(value)
        .map_err(|e| fail(SfdlStatus::Parse, format!("serializing summary: {e}")))
}

/// Opaque per-group credibility state.
pub struct SfdlCredibility {
    inner: CredibilityState,
}

/// Fresh credibility state at the uniform prior.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sfdl_credibility_new(
    group_size: u32,
    max_group_size: u32,
    out: *mut *mut SfdlCredibility,
) -> SfdlStatus {
    if out.is_null() {
        return fail(SfdlStatus::NullPointer, "out is null");
    }
    match CredibilityState::new(group_size as usize, max_group_size as usize) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(SfdlCredibility { inner }));
            SfdlStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// Record one behavior classification: positive `delta` counts toward p,
/// non-positive toward q.
///
/// # Safety
/// `state` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn sfdl_credibility_observe(
    state: *mut SfdlCredibility,
    delta: f64,
) -> SfdlStatus {
    match state.as_mut() {
        Some(s) => {
            s.inner = s.inner.observe(delta);
            SfdlStatus::Ok
        }
        None => fail(SfdlStatus::NullPointer, "state is null"),
    }
}

/// Posterior mean p / (p + q).
///
/// # Safety
/// `state` must be a live handle; `out` must be valid to write.
#[no_mangle]
pub unsafe extern "C" fn sfdl_credibility_effectiveness(
    state: *const SfdlCredibility,
    out: *mut f64,
) -> SfdlStatus {
    if out.is_null() {
        return fail(SfdlStatus::NullPointer, "out is null");
    }
    match state.as_ref() {
        Some(s) => {
            *out = s.inner.effectiveness();
            SfdlStatus::Ok
        }
        None => fail(SfdlStatus::NullPointer, "state is null"),
    }
}

/// Credibility score under the product rule (robustness x effectiveness).
///
/// # Safety
/// `state` must be a live handle; `out` must be valid to write.
#[no_mangle]
pub unsafe extern "C" fn sfdl_credibility_score(
    state: *const SfdlCredibility,
    out: *mut f64,
) -> SfdlStatus {
    if out.is_null() {
        return fail(SfdlStatus::NullPointer, "out is null");
    }
    match state.as_ref() {
        Some(s) => match credibility(&s.inner, CombinationRule::Product) {
            Ok(v) => {
                *out = v;
                SfdlStatus::Ok
            }
            Err(e) => fail_with(e),
        },
        None => fail(SfdlStatus::NullPointer, "state is null"),
    }
}

/// # Safety
/// `state` must be a handle from this library, not yet freed. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn sfdl_credibility_free(state: *mut SfdlCredibility) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

type PointPairs = (Vec<[f64; 2]>, Vec<[f64; 2]>);

unsafe fn paired_points(
    predictions_xy: *const f64,
    observations_xy: *const f64,
    n_points: usize,
) -> Result<PointPairs, SfdlStatus> {
    if predictions_xy.is_null() || observations_xy.is_null() {
        return Err(fail(SfdlStatus::NullPointer, "point buffer is null"));
    }
    let pred = std::slice::from_raw_parts(predictions_xy, 2 * n_points);
    let obs = std::slice::from_raw_parts(observations_xy, 2 * n_points);
    let to_pairs = |s: &[f64]| s.chunks_exact(2).map(|c| [c[0], c[1]]).collect::<Vec<_>>();
    Ok((to_pairs(pred), to_pairs(obs)))
}

/// Mean squared Euclidean deviation over `n_points` interleaved (x, y)
/// pairs.
///
/// # Safety
/// Both buffers must hold `2 * n_points` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sfdl_metric_loss(
    predictions_xy: *const f64,
    observations_xy: *const f64,
    n_points: usize,
    out: *mut f64,
) -> SfdlStatus {
    if out.is_null() {
        return fail(SfdlStatus::NullPointer, "out is null");
    }
    let (pred, obs) = match paired_points(predictions_xy, observations_xy, n_points) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match metric_loss(&pred, &obs) {
        Ok(v) => {
            *out = v;
            SfdlStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// Mean Euclidean distance in meters over `n_points` interleaved (x, y)
/// pairs.
///
/// # Safety
/// Both buffers must hold `2 * n_points` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sfdl_metric_prediction_error(
    predictions_xy: *const f64,
    observations_xy: *const f64,
    n_points: usize,
    out: *mut f64,
) -> SfdlStatus {
    if out.is_null() {
        return fail(SfdlStatus::NullPointer, "out is null");
    }
    let (pred, obs) = match paired_points(predictions_xy, observations_xy, n_points) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match metric_prediction_error(&pred, &obs) {
        Ok(v) => {
            *out = v;
            SfdlStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}

/// Fraction of waypoints within `threshold_m` of the observation.
///
/// # Safety
/// Both buffers must hold `2 * n_points` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sfdl_metric_prediction_accuracy(
    predictions_xy: *const f64,
    observations_xy: *const f64,
    n_points: usize,
    threshold_m: f64,
    out: *mut f64,
) -> SfdlStatus {
    if out.is_null() {
        return fail(SfdlStatus::NullPointer, "out is null");
    }
    let (pred, obs) = match paired_points(predictions_xy, observations_xy, n_points) {
        Ok(p) => p,
        Err(status) => return status,
    };
    match metric_prediction_accuracy(&pred, &obs, threshold_m) {
        Ok(v) => {
            *out = v;
            SfdlStatus::Ok
        }
        Err(e) => fail_with(e),
    }
}
