//! C ABI over the `blowup` library.
//!
//! Objects are opaque handles created by `*_new`-style constructors and
//! released with the matching `*_free`. Every fallible function returns a
//! [`BlowupStatus`]; on failure a message is kept per thread and can be
//! copied out with [`blowup_last_error_message`]. Output pointers are only
//! written on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use blowup::expansion::{power_law_expansion, ExpansionError};
use blowup::nonlinearity::{keller_osserman, make_custom, make_exponential, make_power, KoVerdict, Nonlinearity, TailModel};
use blowup::phase_plane::{solve_large_solution, PhaseError, RadialSolution};
use blowup::picard::{fixed_point, PicardConfig, PicardError};
use blowup::universality::{classify, Verdict};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The growth condition fails, so no large solution exists.
    NoLargeSolution = 3,
    Numerical = 4,
    OutOfRange = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Three-valued answer of the decision procedures.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupVerdict {
    Yes = 0,
    No = 1,
    Inconclusive = 2,
}

/// Tail model of `F` for expression nonlinearities.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupTail {
    /// `F(u) ~ amplitude·u^exponent`.
    Power = 0,
    /// `F(u) ~ amplitude·e^(exponent·u)`.
    Exponential = 1,
    /// No analytic model.
    Numeric = 2,
}

/// Opaque nonlinearity `f` with its antiderivative `F`.
pub struct BlowupNonlinearity(Nonlinearity);

/// Opaque radial large solution normalised to blow up at `r = 1`.
pub struct BlowupSolution(RadialSolution);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: BlowupStatus, message: impl std::fmt::Display) -> BlowupStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.to_string());
    status
}

/// Runs `body`, turning panics into `Panic`.
fn guard(body: impl FnOnce() -> BlowupStatus) -> BlowupStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(BlowupStatus::Panic, msg)
        }
    }
}

fn phase_status(e: PhaseError) -> BlowupStatus {
    let s = match e {
        PhaseError::KoFails(_) => BlowupStatus::NoLargeSolution,
        PhaseError::InvalidInput(_) => BlowupStatus::InvalidArgument,
        PhaseError::OutOfRange(_) => BlowupStatus::OutOfRange,
        _ => BlowupStatus::Numerical,
    };
    fail(s, e)
}

fn picard_status(e: PicardError) -> BlowupStatus {
    let s = match e {
        PicardError::KoFails(_) => BlowupStatus::NoLargeSolution,
        PicardError::InvalidConfig(_) => BlowupStatus::InvalidArgument,
        PicardError::OutOfRange(_) => BlowupStatus::OutOfRange,
        _ => BlowupStatus::Numerical,
    };
    fail(s, e)
}

fn expansion_status(e: ExpansionError) -> BlowupStatus {
    let s = match e {
        ExpansionError::InvalidParameter(_) | ExpansionError::Resonance { .. } => BlowupStatus::InvalidArgument,
        ExpansionError::KoFails(_) => BlowupStatus::NoLargeSolution,
        ExpansionError::OutOfRange { .. } => BlowupStatus::OutOfRange,
        _ => BlowupStatus::Numerical,
    };
    fail(s, e)
}

fn verdict(v: Verdict) -> BlowupVerdict {
    match v {
        Verdict::Universal => BlowupVerdict::Yes,
        Verdict::NonUniversal => BlowupVerdict::No,
        Verdict::Inconclusive => BlowupVerdict::Inconclusive,
    }
}

unsafe fn put<T>(out: *mut T, value: T) -> BlowupStatus {
    if out.is_null() {
        return fail(BlowupStatus::NullPointer, "null output pointer");
    }
    out.write(value);
    BlowupStatus::Ok
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, BlowupStatus> {
    p.as_ref().ok_or_else(|| fail(BlowupStatus::NullPointer, "null handle"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn blowup_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len − 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn blowup_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// `f(u) = u^p` for `u ≥ 0`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn blowup_nonlinearity_power(p: f64, out: *mut *mut BlowupNonlinearity) -> BlowupStatus {
    guard(|| match make_power(p) {
        Ok(nl) => put(out, Box::into_raw(Box::new(BlowupNonlinearity(nl)))),
        Err(e) => fail(BlowupStatus::InvalidArgument, e),
    })
}

/// `f(u) = e^u`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn blowup_nonlinearity_exponential(out: *mut *mut BlowupNonlinearity) -> BlowupStatus {
    guard(|| put(out, Box::into_raw(Box::new(BlowupNonlinearity(make_exponential())))))
}

/// `f` from an expression in `u`, vanishing below `a`, with a tail model for
/// `F` beyond `cutoff`. `amplitude` and `exponent` are ignored for
/// `BLOWUP_TAIL_NUMERIC`.
///
/// # Safety
/// `expr` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blowup_nonlinearity_expression(
    expr: *const c_char,
    a: f64,
    tail: BlowupTail,
    amplitude: f64,
    exponent: f64,
    cutoff: f64,
    out: *mut *mut BlowupNonlinearity,
) -> BlowupStatus {
    guard(|| {
        if expr.is_null() {
            return fail(BlowupStatus::NullPointer, "null expression");
        }
        let Ok(text) = CStr::from_ptr(expr).to_str() else {
            return fail(BlowupStatus::InvalidArgument, "expression is not UTF-8");
        };
        let model = match tail {
            BlowupTail::Power => TailModel::power_law(amplitude, exponent, cutoff),
            BlowupTail::Exponential => TailModel::exponential(amplitude, exponent, cutoff),
            BlowupTail::Numeric => TailModel::numeric_only(cutoff),
        };
        match make_custom(text, a, model) {
            Ok(nl) => put(out, Box::into_raw(Box::new(BlowupNonlinearity(nl)))),
            Err(e) => fail(BlowupStatus::InvalidArgument, e),
        }
    })
}

/// Releases a nonlinearity; null is ignored.
///
/// # Safety
/// `nl` must come from a constructor above and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn blowup_nonlinearity_free(nl: *mut BlowupNonlinearity) {
    if !nl.is_null() {
        drop(Box::from_raw(nl));
    }
}

/// `f(u)` and `F(u)`.
///
/// # Safety
/// `nl` must be a live handle; `f_out` and `big_f_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blowup_nonlinearity_eval(
    nl: *const BlowupNonlinearity,
    u: f64,
    f_out: *mut f64,
    big_f_out: *mut f64,
) -> BlowupStatus {
    guard(|| {
        let nl = match handle(nl) {
            Ok(h) => &h.0,
            Err(s) => return s,
        };
        if f_out.is_null() || big_f_out.is_null() {
            return fail(BlowupStatus::NullPointer, "null output pointer");
        }
        f_out.write(nl.f(u));
        big_f_out.write(nl.big_f(u));
        BlowupStatus::Ok
    })
}

/// Whether `∫^∞ dt/√F` converges.
///
/// # Safety
/// `nl` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blowup_keller_osserman(nl: *const BlowupNonlinearity, out: *mut BlowupVerdict) -> BlowupStatus {
    guard(|| {
        let nl = match handle(nl) {
            Ok(h) => &h.0,
            Err(s) => return s,
        };
        let v = match keller_osserman(nl).verdict {
            KoVerdict::Holds => BlowupVerdict::Yes,
            KoVerdict::Fails => BlowupVerdict::No,
            KoVerdict::Inconclusive => BlowupVerdict::Inconclusive,
        };
        put(out, v)
    })
}

/// Whether the boundary behaviour is the same for every large solution.
///
/// # Safety
/// `nl` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blowup_classify(nl: *const BlowupNonlinearity, out: *mut BlowupVerdict) -> BlowupStatus {
    guard(|| {
        let nl = match handle(nl) {
            Ok(h) => &h.0,
            Err(s) => return s,
        };
        match classify(nl) {
            Ok(r) => put(out, verdict(r.verdict)),
            Err(e) => fail(BlowupStatus::Numerical, e),
        }
    })
}

/// Radial large solution in dimension `dim`, blow-up radius resolved to
/// `tol_radius`.
///
/// # Safety
/// `nl` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blowup_solve(
    nl: *const BlowupNonlinearity,
    dim: usize,
    tol_radius: f64,
    out: *mut *mut BlowupSolution,
) -> BlowupStatus {
    guard(|| {
        let nl = match handle(nl) {
            Ok(h) => &h.0,
            Err(s) => return s,
        };
        match solve_large_solution(nl, dim, tol_radius) {
            Ok(sol) => put(out, Box::into_raw(Box::new(BlowupSolution(sol)))),
            Err(e) => phase_status(e),
        }
    })
}

/// Releases a solution; null is ignored.
///
/// # Safety
/// `sol` must come from [`blowup_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn blowup_solution_free(sol: *mut BlowupSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// `u(r)` for `0 ≤ r < 1`.
///
/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blowup_solution_u_at(sol: *const BlowupSolution, r: f64, out: *mut f64) -> BlowupStatus {
    guard(|| {
        let sol = match handle(sol) {
            Ok(h) => &h.0,
            Err(s) => return s,
        };
        match sol.u_at(r) {
            Ok(u) => put(out, u),
            Err(e) => phase_status(e),
        }
    })
}

/// `u(0)`.
///
/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blowup_solution_center_value(sol: *const BlowupSolution, out: *mut f64) -> BlowupStatus {
    guard(|| match handle(sol) {
        Ok(h) => put(out, h.0.center_value()),
        Err(s) => s,
    })
}

/// Runs the profile iteration to its fixed point. `converged_at` receives
/// the iteration count at convergence, or 0 if `max_iters` was reached.
///
/// # Safety
/// `nl` must be a live handle; `converged_at` and `residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blowup_picard(
    nl: *const BlowupNonlinearity,
    dim: usize,
    rho: f64,
    sup_tol: f64,
    max_iters: usize,
    converged_at: *mut usize,
    residual: *mut f64,
) -> BlowupStatus {
    guard(|| {
        let nl = match handle(nl) {
            Ok(h) => &h.0,
            Err(s) => return s,
        };
        if converged_at.is_null() || residual.is_null() {
            return fail(BlowupStatus::NullPointer, "null output pointer");
        }
        let cfg = PicardConfig { rho, sup_tol, max_iters, ..PicardConfig::default() };
        match fixed_point(nl, dim, &cfg) {
            Ok(r) => {
                converged_at.write(r.converged_at.unwrap_or(0));
                residual.write(r.residual());
                BlowupStatus::Ok
            }
            Err(e) => picard_status(e),
        }
    })
}

/// Coefficients `a_0..=a_order` of `u = d^(−2/(p−1))·Σ a_k d^k` for `f = u^p`.
///
/// The number of coefficients is stored in `written`. If `cap` is too small,
/// nothing is copied, `written` holds the required length and
/// `BLOWUP_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `coeffs` must point to `cap` writable doubles (or be null when `cap` is
/// 0); `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blowup_power_expansion(
    p: f64,
    dim: usize,
    order: usize,
    coeffs: *mut f64,
    cap: usize,
    written: *mut usize,
) -> BlowupStatus {
    guard(|| {
        if written.is_null() {
            return fail(BlowupStatus::NullPointer, "null output pointer");
        }
        let exp = match power_law_expansion(p, dim, order) {
            Ok(e) => e,
            Err(e) => return expansion_status(e),
        };
        written.write(exp.coeffs.len());
        if exp.coeffs.len() > cap {
            return fail(BlowupStatus::BufferTooSmall, format!("{} coefficients needed", exp.coeffs.len()));
        }
        if coeffs.is_null() {
            return fail(BlowupStatus::NullPointer, "null coefficient buffer");
        }
        std::ptr::copy_nonoverlapping(exp.coeffs.as_ptr(), coeffs, exp.coeffs.len());
        BlowupStatus::Ok
    })
}
