//! C ABI over `elicit-core`.
//!
//! Every function returns an [`ElicitStatus`]; results come back through
//! out-pointers. On failure [`elicit_last_error`] describes what went wrong
//! on the calling thread. Judgement sets and sessions are opaque handles
//! that must be released with their `_free` function, and strings returned
//! by the library with [`elicit_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use elicit::distributions::{FamilyKind, LocationScaleDistribution};
use elicit::fitting::{check_feasibility, fit_exact_symmetric, fit_least_squares, FitError, FitResult};
use elicit::judgements::{canonical_set, CanonicalKind, ImprecisionBox, Judgement, JudgementSet};
use elicit::session::{ElicitationSession, SessionError, SessionEvent, SessionState};

pub const ELICIT_FAMILY_NORMAL: c_int = 0;
pub const ELICIT_FAMILY_STUDENT_T: c_int = 1;
pub const ELICIT_FAMILY_CAUCHY: c_int = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElicitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidJudgements = 3,
    FitFailed = 4,
    InvalidTransition = 5,
    ParseError = 6,
    UnsupportedVersion = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElicitSessionState {
    Collecting = 0,
    Fitted = 1,
    FeedbackGiven = 2,
    Finalized = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ElicitFit {
    pub location: f64,
    pub scale: f64,
    pub max_abs_residual: f64,
    pub sse: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ElicitFeasibility {
    pub feasible: bool,
    pub min_max_violation: f64,
    /// The widest-margin member when feasible, the least-violating one otherwise.
    pub location: f64,
    pub scale: f64,
}

/// Opaque judgement set.
pub struct ElicitJudgementSet(JudgementSet);

/// Opaque elicitation session.
pub struct ElicitSession(ElicitationSession);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(ElicitStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(ElicitStatus::NullPointer, format!("{what} is null"))
    }

    fn arg(message: impl Into<String>) -> Self {
        Failure(ElicitStatus::InvalidArgument, message.into())
    }
}

impl From<FitError> for Failure {
    fn from(e: FitError) -> Self {
        let status = match e {
            FitError::InvalidJudgements(_) => ElicitStatus::InvalidJudgements,
            _ => ElicitStatus::FitFailed,
        };
        Failure(status, e.to_string())
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        let status = match &e {
            SessionError::InvalidTransition { .. } => ElicitStatus::InvalidTransition,
            SessionError::InvalidJudgements(_) => ElicitStatus::InvalidJudgements,
            SessionError::Fit(FitError::InvalidJudgements(_)) => ElicitStatus::InvalidJudgements,
            SessionError::Fit(_) | SessionError::Feedback(_) => ElicitStatus::FitFailed,
            SessionError::Parse { .. } => ElicitStatus::ParseError,
            SessionError::UnsupportedVersion(_) => ElicitStatus::UnsupportedVersion,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, translating failures and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ElicitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ElicitStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ElicitStatus::Panic
        }
    }
}

fn family_kind(code: c_int, dof: u32) -> Result<FamilyKind, Failure> {
    match code {
        ELICIT_FAMILY_NORMAL => Ok(FamilyKind::Normal),
        ELICIT_FAMILY_STUDENT_T => {
            FamilyKind::student_t(dof).ok_or_else(|| Failure::arg("degrees of freedom must be positive"))
        }
        ELICIT_FAMILY_CAUCHY => Ok(FamilyKind::Cauchy),
        other => Err(Failure::arg(format!("unknown family code {other}"))),
    }
}

fn dist(code: c_int, dof: u32, location: f64, scale: f64) -> Result<LocationScaleDistribution, Failure> {
    LocationScaleDistribution::new(family_kind(code, dof)?, location, scale).map_err(|e| Failure::arg(e.to_string()))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::arg(format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| Failure::arg("string contains NUL"))
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library.
#[no_mangle]
pub extern "C" fn elicit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn elicit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `P(X <= x)`. `dof` is read only for Student-t.
///
/// # Safety
/// `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_cdf(
    family: c_int,
    dof: u32,
    location: f64,
    scale: f64,
    x: f64,
    result: *mut f64,
) -> ElicitStatus {
    guard(|| {
        let r = out(result, "result")?;
        *r = dist(family, dof, location, scale)?.cdf(x).map_err(|e| Failure::arg(e.to_string()))?;
        Ok(())
    })
}

/// Inverse of [`elicit_cdf`] for `p` in (0, 1).
///
/// # Safety
/// `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_quantile(
    family: c_int,
    dof: u32,
    location: f64,
    scale: f64,
    p: f64,
    result: *mut f64,
) -> ElicitStatus {
    guard(|| {
        let r = out(result, "result")?;
        *r = dist(family, dof, location, scale)?.quantile(p).map_err(|e| Failure::arg(e.to_string()))?;
        Ok(())
    })
}

/// Creates an empty judgement set.
///
/// # Safety
/// `set` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_judgements_new(set: *mut *mut ElicitJudgementSet) -> ElicitStatus {
    guard(|| {
        *out(set, "set")? = Box::into_raw(Box::new(ElicitJudgementSet(JudgementSet::default())));
        Ok(())
    })
}

/// The worked-example judgements: `points` is 3 or 5.
///
/// # Safety
/// `set` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_judgements_canonical(
    points: u32,
    with_boxes: bool,
    set: *mut *mut ElicitJudgementSet,
) -> ElicitStatus {
    guard(|| {
        let target = out(set, "set")?;
        let kind = match points {
            3 => CanonicalKind::Three,
            5 => CanonicalKind::Five,
            n => return Err(Failure::arg(format!("no canonical set with {n} judgements"))),
        };
        *target = Box::into_raw(Box::new(ElicitJudgementSet(canonical_set(kind, with_boxes))));
        Ok(())
    })
}

/// Parses `{"judgements": [{"p": .., "x": .., "dp": .., "dx": ..}]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `set` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_judgements_from_json(
    json: *const c_char,
    set: *mut *mut ElicitJudgementSet,
) -> ElicitStatus {
    guard(|| {
        let target = out(set, "set")?;
        let parsed = JudgementSet::from_json(str_arg(json, "json")?)
            .map_err(|e| Failure(ElicitStatus::ParseError, e.to_string()))?;
        *target = Box::into_raw(Box::new(ElicitJudgementSet(parsed)));
        Ok(())
    })
}

/// Appends `P(X < x) = p` with a box of half-widths `dp`, `dx`.
///
/// # Safety
/// `set` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn elicit_judgements_push(
    set: *mut ElicitJudgementSet,
    p: f64,
    x: f64,
    dp: f64,
    dx: f64,
) -> ElicitStatus {
    guard(|| {
        out(set, "set")?.0.push(Judgement::new(p, x), ImprecisionBox::new(dp, dx));
        Ok(())
    })
}

/// # Safety
/// `set` must be a live handle; `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_judgements_len(set: *const ElicitJudgementSet, len: *mut usize) -> ElicitStatus {
    guard(|| {
        let s = set.as_ref().ok_or_else(|| Failure::null("set"))?;
        *out(len, "len")? = s.0.len();
        Ok(())
    })
}

/// # Safety
/// `set` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn elicit_judgements_free(set: *mut ElicitJudgementSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

unsafe fn fit_with(
    set: *const ElicitJudgementSet,
    family: c_int,
    dof: u32,
    result: *mut ElicitFit,
    fit: fn(FamilyKind, &JudgementSet) -> Result<FitResult, FitError>,
) -> ElicitStatus {
    guard(|| {
        let s = set.as_ref().ok_or_else(|| Failure::null("set"))?;
        let r = out(result, "result")?;
        let f = fit(family_kind(family, dof)?, &s.0)?;
        *r = ElicitFit {
            location: f.dist.location(),
            scale: f.dist.scale(),
            max_abs_residual: f.max_abs_residual,
            sse: f.sse,
        };
        Ok(())
    })
}

/// Interpolates the median and the complementary pair nearest the quartiles.
///
/// # Safety
/// `set` must be a live handle; `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_fit_exact(
    set: *const ElicitJudgementSet,
    family: c_int,
    dof: u32,
    result: *mut ElicitFit,
) -> ElicitStatus {
    fit_with(set, family, dof, result, fit_exact_symmetric)
}

/// Minimizes the squared probability residuals.
///
/// # Safety
/// `set` must be a live handle; `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_fit_least_squares(
    set: *const ElicitJudgementSet,
    family: c_int,
    dof: u32,
    result: *mut ElicitFit,
) -> ElicitStatus {
    fit_with(set, family, dof, result, fit_least_squares)
}

/// Whether some member of the family passes through every box. An
/// infeasible family is a successful call with `feasible == false`.
///
/// # Safety
/// `set` must be a live handle; `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_check_feasibility(
    set: *const ElicitJudgementSet,
    family: c_int,
    dof: u32,
    result: *mut ElicitFeasibility,
) -> ElicitStatus {
    guard(|| {
        let s = set.as_ref().ok_or_else(|| Failure::null("set"))?;
        let r = out(result, "result")?;
        let f = check_feasibility(family_kind(family, dof)?, &s.0)?;
        let member = f.witness.unwrap_or(f.best);
        *r = ElicitFeasibility {
            feasible: f.feasible,
            min_max_violation: f.min_max_violation,
            location: member.location(),
            scale: member.scale(),
        };
        Ok(())
    })
}

/// Starts an empty session.
///
/// # Safety
/// `id` and `label` must be NUL-terminated strings; `session` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_session_new(
    id: *const c_char,
    label: *const c_char,
    session: *mut *mut ElicitSession,
) -> ElicitStatus {
    guard(|| {
        let target = out(session, "session")?;
        let s = ElicitationSession::new(str_arg(id, "id")?, str_arg(label, "label")?);
        *target = Box::into_raw(Box::new(ElicitSession(s)));
        Ok(())
    })
}

/// Applies one event, e.g. `{"type": "fit", "families": ["normal"]}`. On
/// failure the session is unchanged.
///
/// # Safety
/// `session` must be a live handle; `event_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn elicit_session_apply_json(
    session: *mut ElicitSession,
    event_json: *const c_char,
) -> ElicitStatus {
    guard(|| {
        let s = out(session, "session")?;
        let event: SessionEvent = serde_json::from_str(str_arg(event_json, "event_json")?)
            .map_err(|e| Failure(ElicitStatus::ParseError, format!("invalid event: {e}")))?;
        s.0 = s.0.apply_event(event)?;
        Ok(())
    })
}

/// # Safety
/// `session` must be a live handle; `state` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_session_state(
    session: *const ElicitSession,
    state: *mut ElicitSessionState,
) -> ElicitStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| Failure::null("session"))?;
        *out(state, "state")? = match s.0.state {
            SessionState::Collecting => ElicitSessionState::Collecting,
            SessionState::Fitted => ElicitSessionState::Fitted,
            SessionState::FeedbackGiven => ElicitSessionState::FeedbackGiven,
            SessionState::Finalized => ElicitSessionState::Finalized,
        };
        Ok(())
    })
}

/// Serializes the session document; free the result with
/// [`elicit_string_free`].
///
/// # Safety
/// `session` must be a live handle; `json` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_session_to_json(session: *const ElicitSession, json: *mut *mut c_char) -> ElicitStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| Failure::null("session"))?;
        let target = out(json, "json")?;
        *target = into_c_string(s.0.save())?;
        Ok(())
    })
}

/// Reads a session document written by [`elicit_session_to_json`].
///
/// # Safety
/// `json` must be a NUL-terminated string; `session` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn elicit_session_load(json: *const c_char, session: *mut *mut ElicitSession) -> ElicitStatus {
    guard(|| {
        let target = out(session, "session")?;
        let s = ElicitationSession::load(str_arg(json, "json")?)?;
        *target = Box::into_raw(Box::new(ElicitSession(s)));
        Ok(())
    })
}

/// # Safety
/// `session` must come from this library and not have been freed. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn elicit_session_free(session: *mut ElicitSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}
