//! C ABI over motiongate: load a model artifact, parse a trace, score it.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns an [`MgStatus`]; on
//! failure `mg_last_error_message` describes the error for the calling thread.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use motiongate::artifact::{ArtifactError, ModelArtifact};
use motiongate::classifiers::ClassifierError;
use motiongate::preprocess::PreprocessError;
use motiongate::protocols::{Decision, Direction};
use motiongate::trace::{parse_trace, MotionTrace};
use motiongate::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Io = 4,
    Version = 5,
    WindowOutOfRange = 6,
    UnknownClaim = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgDecision {
    Accept = 0,
    Reject = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgDirection {
    /// Anomaly scores: reject when score > threshold.
    RejectAbove = 0,
    /// Verification scores: reject when score < threshold.
    RejectBelow = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgScore {
    pub score: f64,
    pub threshold: f64,
    pub decision: MgDecision,
    pub direction: MgDirection,
}

/// A loaded model artifact.
pub struct MgModel(ModelArtifact);

/// A parsed, validated trace.
pub struct MgTrace(MotionTrace);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> MgStatus {
    match e {
        Error::Io { .. } => MgStatus::Io,
        Error::Artifact(ArtifactError::UnsupportedVersion { .. }) => MgStatus::Version,
        Error::Artifact(ArtifactError::MissingClaim) | Error::Classifier(ClassifierError::UnknownClaim(_)) => {
            MgStatus::UnknownClaim
        }
        Error::Preprocess(PreprocessError::WindowOutOfRange { .. }) => MgStatus::WindowOutOfRange,
        Error::Trace(_) | Error::Artifact(_) => MgStatus::Parse,
        _ => MgStatus::Internal,
    }
}

/// Runs `f`, recording any error or panic for `mg_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), (MgStatus, String)>) -> MgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MgStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MgStatus::Panic
        }
    }
}

fn fail(e: Error) -> (MgStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MgStatus, String) {
    (MgStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or point to `len` readable bytes.
unsafe fn bytes<'a>(ptr: *const u8, len: usize, what: &str) -> Result<&'a [u8], (MgStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Loads a model artifact from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mg_model_load(path: *const c_char, out: *mut *mut MgModel) -> MgStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| (MgStatus::InvalidUtf8, format!("path: {e}")))?;
        let model = ModelArtifact::load(Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(MgModel(model)));
        Ok(())
    })
}

/// Loads a model artifact from JSON bytes.
///
/// # Safety
/// `json` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mg_model_from_json(json: *const u8, len: usize, out: *mut *mut MgModel) -> MgStatus {
    guard(|| {
        let json = bytes(json, len, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let model = ModelArtifact::from_json(json).map_err(|e| fail(e.into()))?;
        *out = Box::into_raw(Box::new(MgModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `mg_model_load`/`mg_model_from_json`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mg_model_free(model: *mut MgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Parses a trace from its canonical CSV and sidecar JSON.
///
/// # Safety
/// `csv` and `meta` must point to `csv_len` and `meta_len` readable bytes;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mg_trace_parse(
    csv: *const u8,
    csv_len: usize,
    meta: *const u8,
    meta_len: usize,
    out: *mut *mut MgTrace,
) -> MgStatus {
    guard(|| {
        let csv = bytes(csv, csv_len, "csv")?;
        let meta = bytes(meta, meta_len, "meta")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let trace = parse_trace(csv, meta).map_err(|e| fail(e.into()))?;
        *out = Box::into_raw(Box::new(MgTrace(trace)));
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle from `mg_trace_parse` that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn mg_trace_free(trace: *mut MgTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Scores `trace` with `model`. `claimed_id` is the claimed participant for
/// verification models; pass -1 for none.
///
/// # Safety
/// `model` and `trace` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mg_score(
    model: *const MgModel,
    trace: *const MgTrace,
    claimed_id: i64,
    out: *mut MgScore,
) -> MgStatus {
    guard(|| {
        if model.is_null() {
            return Err(null("model"));
        }
        if trace.is_null() {
            return Err(null("trace"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let claim = match claimed_id {
            -1 => None,
            id => Some(
                u32::try_from(id).map_err(|_| (MgStatus::UnknownClaim, format!("claimed id {id} out of range")))?,
            ),
        };
        let o = (*model).0.score_trace(&(*trace).0, claim).map_err(fail)?;
        *out = MgScore {
            score: o.score,
            threshold: o.threshold,
            decision: match o.decision {
                Decision::Accept => MgDecision::Accept,
                Decision::Reject => MgDecision::Reject,
            },
            direction: match o.direction {
                Direction::RejectAbove => MgDirection::RejectAbove,
                Direction::RejectBelow => MgDirection::RejectBelow,
            },
        };
        Ok(())
    })
}

/// Message for the last failed call on this thread, or "" after a success.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn mg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, NUL-terminated, static.
#[no_mangle]
pub extern "C" fn mg_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
