//! C ABI for `qcc-core`.
//!
//! Channels and decisions are opaque heap handles released with their
//! `*_free` function. Fallible calls return a [`QccStatus`]; on failure the
//! message is available from [`qcc_last_error`] on the same thread until
//! the next failing call. Strings returned to the caller are released with
//! [`qcc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qcc_core::channels::{standard_channel, Channel, StandardKind};
use qcc_core::io::{channel_from_str, channel_to_string, CertificateJson};
use qcc_core::sdp::decide::{decide, decide_self_compat, DecideMode, Verdict};
use qcc_core::sdp::SolveOptions;
use qcc_core::Error;

/// Opaque channel handle.
pub struct QccChannel(Channel);

/// Opaque result of a compatibility decision.
pub struct QccDecision {
    verdict: Verdict,
    alpha: f64,
    certificate: Option<CString>,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    DimensionMismatch = 4,
    InvalidInput = 5,
    Solver = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QccVerdict {
    Compatible = 0,
    Incompatible = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QccMode {
    Compat = 0,
    Jordan = 1,
    PptCompat = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QccSolver {
    InteriorPoint = 0,
    Projection = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> QccStatus {
    match e {
        Error::Parse(_) => QccStatus::Parse,
        Error::DimensionMismatch(_) | Error::ShapeMismatch { .. } => QccStatus::DimensionMismatch,
        Error::SizeCap(_) | Error::IllPosed(_) | Error::NoConvergence => QccStatus::Solver,
        _ => QccStatus::InvalidInput,
    }
}

/// Runs `body`, recording errors and converting panics.
fn guard(body: impl FnOnce() -> Result<(), QccStatus>) -> QccStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => QccStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            QccStatus::Panic
        }
    }
}

fn fail(e: Error) -> QccStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> QccStatus {
    set_error(format!("{what} is null"));
    QccStatus::NullPointer
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, QccStatus> {
    if s.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a NUL-terminated string.
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        QccStatus::InvalidUtf8
    })
}

unsafe fn channel_ref<'a>(ch: *const QccChannel, what: &str) -> Result<&'a Channel, QccStatus> {
    // SAFETY: non-null handles come from `Box::into_raw` in this crate.
    ch.as_ref().map(|c| &c.0).ok_or_else(|| null(what))
}

fn options(solver: QccSolver, tol: f64) -> SolveOptions {
    let mut o = match solver {
        QccSolver::InteriorPoint => SolveOptions::default(),
        QccSolver::Projection => SolveOptions::projection(),
    };
    if tol > 0.0 && tol.is_finite() {
        o.decision_tol = tol;
    }
    o
}

fn verdict(v: Verdict) -> QccVerdict {
    match v {
        Verdict::Compatible => QccVerdict::Compatible,
        Verdict::Incompatible => QccVerdict::Incompatible,
        Verdict::Inconclusive => QccVerdict::Inconclusive,
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qcc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qcc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcc_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by `CString::into_raw`.
        drop(CString::from_raw(s));
    }
}

/// Parses a channel from its JSON form (`d_in`, `d_out`, `choi`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qcc_channel_from_json(json: *const c_char, out: *mut *mut QccChannel) -> QccStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let ch = channel_from_str(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(QccChannel(ch)));
        Ok(())
    })
}

/// `Ω_q = q·Ω + (1−q)·I` on dimension `d`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qcc_channel_partial_depolarizing(d: usize, q: f64, out: *mut *mut QccChannel) -> QccStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ch = standard_channel(&StandardKind::PartialDepolarizing(q), d).map_err(fail)?;
        *out = Box::into_raw(Box::new(QccChannel(ch)));
        Ok(())
    })
}

/// `Ξ_{p,q} = (1−p−q)·I + p·Δ + q·Ω` on a qubit.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qcc_channel_xi(p: f64, q: f64, out: *mut *mut QccChannel) -> QccStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ch = standard_channel(&StandardKind::Xi { p, q }, 2).map_err(fail)?;
        *out = Box::into_raw(Box::new(QccChannel(ch)));
        Ok(())
    })
}

/// Input and output dimensions of a channel.
///
/// # Safety
/// `ch` must be a live handle; `d_in` and `d_out` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn qcc_channel_dims(ch: *const QccChannel, d_in: *mut usize, d_out: *mut usize) -> QccStatus {
    guard(|| {
        let ch = channel_ref(ch, "channel")?;
        if d_in.is_null() || d_out.is_null() {
            return Err(null("dimension output"));
        }
        *d_in = ch.d_in();
        *d_out = ch.d_out();
        Ok(())
    })
}

/// JSON form of a channel; free with [`qcc_string_free`]. NULL on error.
///
/// # Safety
/// `ch` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qcc_channel_to_json(ch: *const QccChannel) -> *mut c_char {
    match channel_ref(ch, "channel") {
        Ok(ch) => into_c_string(channel_to_string(ch)),
        Err(_) => ptr::null_mut(),
    }
}

/// # Safety
/// `ch` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcc_channel_free(ch: *mut QccChannel) {
    if !ch.is_null() {
        // SAFETY: produced by `Box::into_raw`.
        drop(Box::from_raw(ch));
    }
}

/// Decides compatibility of `f` and `g`. `tol <= 0` keeps the default
/// decision tolerance.
///
/// # Safety
/// `f`, `g` must be live handles and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qcc_decide(
    f: *const QccChannel,
    g: *const QccChannel,
    mode: QccMode,
    solver: QccSolver,
    tol: f64,
    out: *mut *mut QccDecision,
) -> QccStatus {
    guard(|| {
        let f = channel_ref(f, "f")?;
        let g = channel_ref(g, "g")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = match mode {
            QccMode::Compat => DecideMode::Compat,
            QccMode::Jordan => DecideMode::Jordan,
            QccMode::PptCompat => DecideMode::PptCompat,
        };
        let dec = decide(f, g, mode, &options(solver, tol)).map_err(fail)?;
        let certificate = CertificateJson::from_decision(&dec, f, Some(g)).and_then(|c| CString::new(c.to_json()).ok());
        *out = Box::into_raw(Box::new(QccDecision {
            verdict: dec.verdict,
            alpha: dec.alpha,
            certificate,
        }));
        Ok(())
    })
}

/// Decides whether `k` copies of `f` are compatible.
///
/// # Safety
/// `f` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qcc_self_compat(
    f: *const QccChannel,
    k: usize,
    solver: QccSolver,
    tol: f64,
    out: *mut *mut QccDecision,
) -> QccStatus {
    guard(|| {
        let f = channel_ref(f, "f")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if k < 2 {
            return Err(fail(Error::ParameterOutOfRange(format!("k = {k} must be at least 2"))));
        }
        let dec = decide_self_compat(f, k, false, &options(solver, tol)).map_err(fail)?;
        let certificate = CertificateJson::from_decision(&dec, f, None).and_then(|c| CString::new(c.to_json()).ok());
        *out = Box::into_raw(Box::new(QccDecision {
            verdict: dec.verdict,
            alpha: dec.alpha,
            certificate,
        }));
        Ok(())
    })
}

/// # Safety
/// `dec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qcc_decision_verdict(dec: *const QccDecision) -> QccVerdict {
    // SAFETY: non-null handles come from `Box::into_raw`.
    dec.as_ref().map_or(QccVerdict::Inconclusive, |d| verdict(d.verdict))
}

/// Optimal shift `α`; NaN for a NULL handle.
///
/// # Safety
/// `dec` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qcc_decision_alpha(dec: *const QccDecision) -> f64 {
    dec.as_ref().map_or(f64::NAN, |d| d.alpha)
}

/// Certificate JSON borrowed from the decision, or NULL when none was
/// produced. Valid until the decision is freed.
///
/// # Safety
/// `dec` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qcc_decision_certificate(dec: *const QccDecision) -> *const c_char {
    dec.as_ref()
        .and_then(|d| d.certificate.as_ref())
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// # Safety
/// `dec` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcc_decision_free(dec: *mut QccDecision) {
    if !dec.is_null() {
        // SAFETY: produced by `Box::into_raw`.
        drop(Box::from_raw(dec));
    }
}

/// Re-checks a certificate against its channels without a solver. `g` may
/// be NULL for extension certificates. Writes validity and margin.
///
/// # Safety
/// `cert_json` must be a NUL-terminated string, `f` a live handle, `g` NULL
/// or a live handle, and `valid`, `margin` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn qcc_certificate_verify(
    cert_json: *const c_char,
    f: *const QccChannel,
    g: *const QccChannel,
    valid: *mut bool,
    margin: *mut f64,
) -> QccStatus {
    guard(|| {
        let text = read_str(cert_json, "certificate")?;
        let f = channel_ref(f, "f")?;
        let g = if g.is_null() { None } else { Some(channel_ref(g, "g")?) };
        if valid.is_null() || margin.is_null() {
            return Err(null("result output"));
        }
        let cert = CertificateJson::from_json(text).map_err(fail)?;
        let v = cert.verify(f, g).map_err(fail)?;
        *valid = v.valid;
        *margin = v.margin;
        Ok(())
    })
}
