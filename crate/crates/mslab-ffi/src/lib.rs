//! C interface to the analysis library.
//!
//! The surface follows one set of conventions throughout:
//!
//! * Handles ([`MslabExpr`], [`MslabSpace`]) are opaque pointers produced by
//!   a `*_parse` call and released by the matching `*_free` call.
//! * Fallible calls return an [`MslabStatus`]. Anything other than `Ok`
//!   leaves a message that [`mslab_last_error_message`] exposes until the
//!   next failure on the same thread.
//! * Strings handed to the caller (formatted expressions, digests, rendered
//!   reports) are NUL-terminated, owned by the caller, and released with
//!   [`mslab_string_free`].
//! * Panics never cross the boundary; they surface as
//!   [`MslabStatus::Internal`].
//!
//! Unlike the command-line front end, the analysis entry points here do not
//! demand a verification token; [`mslab_verify`] runs the same suite and can
//! write a token for callers that want the gate.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num_complex::Complex64;

use mslab::error::MslabError;
use mslab::hgamma::SpacePair;
use mslab::numerics::{QuadratureSpec, SupScanConfig};
use mslab::symb::Expr;
use mslab::{report, verify, workbench};

/// Outcome of a call across the C boundary.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MslabStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An expression failed to parse.
    Syntax = 3,
    /// A configuration (space JSON, tolerances, constants) was rejected.
    Config = 4,
    /// The computation failed: a pole was hit, a quantity diverged, or
    /// quadrature did not converge.
    Numeric = 5,
    /// The self-verification suite did not pass.
    Verification = 6,
    /// A panic was caught at the boundary.
    Internal = 7,
}

/// A parsed symbol: an expression in one complex variable.
pub struct MslabExpr(Expr);

/// A reproducing-kernel space built from nodes and weights.
pub struct MslabSpace(SpacePair);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let cleaned = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = cleaned);
}

fn status_for(err: &MslabError) -> MslabStatus {
    use MslabError::*;
    match err {
        Syntax { .. } => MslabStatus::Syntax,
        SpaceConfig(_) | InnerConfig(_) | BadQuadratureSpec(_) | Config(_) | TooFewPoints
        | Io(_) | Json(_) => MslabStatus::Config,
        NotVerified(_) => MslabStatus::Verification,
        _ => MslabStatus::Numeric,
    }
}

fn fail(err: MslabError) -> MslabStatus {
    let status = status_for(&err);
    set_error(&err.to_string());
    status
}

fn null_argument(name: &str) -> MslabStatus {
    set_error(&format!("{name} must not be null"));
    MslabStatus::NullArgument
}

fn guarded(body: impl FnOnce() -> MslabStatus) -> MslabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic caught at the C boundary");
            MslabStatus::Internal
        }
    }
}

unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, MslabStatus> {
    if ptr.is_null() {
        return Err(null_argument(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        MslabStatus::InvalidUtf8
    })
}

unsafe fn give_string(out: *mut *mut c_char, text: String) -> MslabStatus {
    match CString::new(text) {
        Ok(owned) => {
            *out = owned.into_raw();
            MslabStatus::Ok
        }
        Err(_) => {
            set_error("rendered output contained an interior NUL byte");
            MslabStatus::Internal
        }
    }
}

fn quadrature(rel_tol: f64) -> Result<QuadratureSpec, MslabError> {
    let mut spec = QuadratureSpec::default();
    if rel_tol > 0.0 {
        spec.rel_tol = rel_tol;
    }
    spec.validate()?;
    Ok(spec)
}

/// Message from the most recent failing call on this thread.
///
/// Never null; empty until the first failure. The pointer stays valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mslab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string obtained from this library.
#[no_mangle]
pub unsafe extern "C" fn mslab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse an expression such as `log(z + 1i)` into a handle.
///
/// On success `*out` owns the handle; release it with [`mslab_expr_free`].
#[no_mangle]
pub unsafe extern "C" fn mslab_expr_parse(
    src: *const c_char,
    out: *mut *mut MslabExpr,
) -> MslabStatus {
    guarded(|| unsafe {
        if out.is_null() {
            return null_argument("out");
        }
        let src = match utf8_arg(src, "src") {
            Ok(text) => text,
            Err(status) => return status,
        };
        match Expr::parse(src) {
            Ok(expr) => {
                *out = Box::into_raw(Box::new(MslabExpr(expr)));
                MslabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Differentiate an expression into a fresh handle.
#[no_mangle]
pub unsafe extern "C" fn mslab_expr_derivative(
    expr: *const MslabExpr,
    out: *mut *mut MslabExpr,
) -> MslabStatus {
    guarded(|| unsafe {
        if out.is_null() {
            return null_argument("out");
        }
        let expr = match expr.as_ref() {
            Some(handle) => &handle.0,
            None => return null_argument("expr"),
        };
        *out = Box::into_raw(Box::new(MslabExpr(expr.derivative())));
        MslabStatus::Ok
    })
}

/// Evaluate an expression at `re + i*im`, writing the result components.
#[no_mangle]
pub unsafe extern "C" fn mslab_expr_eval(
    expr: *const MslabExpr,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> MslabStatus {
    guarded(|| unsafe {
        if out_re.is_null() || out_im.is_null() {
            return null_argument("out_re/out_im");
        }
        let expr = match expr.as_ref() {
            Some(handle) => &handle.0,
            None => return null_argument("expr"),
        };
        match expr.eval(Complex64::new(re, im)) {
            Ok(value) => {
                *out_re = value.re;
                *out_im = value.im;
                MslabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Render an expression back to text. Release the string with
/// [`mslab_string_free`].
#[no_mangle]
pub unsafe extern "C" fn mslab_expr_format(
    expr: *const MslabExpr,
    out: *mut *mut c_char,
) -> MslabStatus {
    guarded(|| unsafe {
        if out.is_null() {
            return null_argument("out");
        }
        let expr = match expr.as_ref() {
            Some(handle) => &handle.0,
            None => return null_argument("expr"),
        };
        give_string(out, expr.to_string())
    })
}

/// Release an expression handle. Null is a no-op.
///
/// # Safety
/// `expr` must be null or a pointer from [`mslab_expr_parse`] or
/// [`mslab_expr_derivative`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mslab_expr_free(expr: *mut MslabExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Build a space from its JSON description: `gammas` as `[re, im]` pairs,
/// `weights`, and an optional `tail` block. Release the handle with
/// [`mslab_space_free`].
#[no_mangle]
pub unsafe extern "C" fn mslab_space_parse_json(
    json: *const c_char,
    out: *mut *mut MslabSpace,
) -> MslabStatus {
    guarded(|| unsafe {
        if out.is_null() {
            return null_argument("out");
        }
        let json = match utf8_arg(json, "json") {
            Ok(text) => text,
            Err(status) => return status,
        };
        match SpacePair::from_json_str(json) {
            Ok(space) => {
                *out = Box::into_raw(Box::new(MslabSpace(space)));
                MslabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of nodes in the space; zero for a null handle.
#[no_mangle]
pub unsafe extern "C" fn mslab_space_len(space: *const MslabSpace) -> usize {
    match space.as_ref() {
        Some(handle) => handle.0.len(),
        None => 0,
    }
}

/// Sparseness ratio of the node moduli. Needs at least two nodes.
#[no_mangle]
pub unsafe extern "C" fn mslab_space_sparseness(
    space: *const MslabSpace,
    out: *mut f64,
) -> MslabStatus {
    guarded(|| unsafe {
        if out.is_null() {
            return null_argument("out");
        }
        let space = match space.as_ref() {
            Some(handle) => &handle.0,
            None => return null_argument("space"),
        };
        match space.sparseness_ratio() {
            Ok(q) => {
                *out = q;
                MslabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Truncated admissibility sum over the declared nodes (the geometric tail
/// bound, when one applies, is not included).
#[no_mangle]
pub unsafe extern "C" fn mslab_space_admissibility_sum(
    space: *const MslabSpace,
    out: *mut f64,
) -> MslabStatus {
    guarded(|| unsafe {
        if out.is_null() {
            return null_argument("out");
        }
        let space = match space.as_ref() {
            Some(handle) => &handle.0,
            None => return null_argument("space"),
        };
        *out = space.admissibility().partial_sum;
        MslabStatus::Ok
    })
}

/// Hex digest identifying the space configuration. Release the string with
/// [`mslab_string_free`].
#[no_mangle]
pub unsafe extern "C" fn mslab_space_hash(
    space: *const MslabSpace,
    out: *mut *mut c_char,
) -> MslabStatus {
    guarded(|| unsafe {
        if out.is_null() {
            return null_argument("out");
        }
        let space = match space.as_ref() {
            Some(handle) => &handle.0,
            None => return null_argument("space"),
        };
        give_string(out, space.hash())
    })
}

/// Release a space handle. Null is a no-op.
///
/// # Safety
/// `space` must be null or a pointer from [`mslab_space_parse_json`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn mslab_space_free(space: *mut MslabSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Run the self-verification suite with the given area constant; pass a
/// non-positive value for the default 4.0.
///
/// When `token_dir` is non-null and the suite passes, a token recording the
/// constant is written there; the command-line tool honors the same token.
#[no_mangle]
pub unsafe extern "C" fn mslab_verify(c_lp: f64, token_dir: *const c_char) -> MslabStatus {
    guarded(|| unsafe {
        let c_lp = if c_lp > 0.0 { c_lp } else { 4.0 };
        let outcome = match verify::run_verify(c_lp, &QuadratureSpec::default()) {
            Ok(outcome) => outcome,
            Err(e) => return fail(e),
        };
        if !outcome.passed() {
            let failed: Vec<&str> = outcome
                .checks
                .iter()
                .filter(|check| !check.passed)
                .map(|check| check.name)
                .collect();
            return fail(MslabError::NotVerified(failed.join(", ")));
        }
        if !token_dir.is_null() {
            let dir = match utf8_arg(token_dir, "token_dir") {
                Ok(text) => text,
                Err(status) => return status,
            };
            if let Err(e) = verify::write_token(Path::new(dir), c_lp) {
                return fail(e);
            }
        }
        MslabStatus::Ok
    })
}

/// Run the integral-operator analysis for a symbol over a space and hand
/// back the rendered JSON report. Pass non-positive `c_lp` or `rel_tol` for
/// the defaults (4.0 and the standard tolerance). Release the string with
/// [`mslab_string_free`].
#[no_mangle]
pub unsafe extern "C" fn mslab_analyze_volterra(
    space: *const MslabSpace,
    symbol: *const c_char,
    c_lp: f64,
    rel_tol: f64,
    out_json: *mut *mut c_char,
) -> MslabStatus {
    guarded(|| unsafe {
        if out_json.is_null() {
            return null_argument("out_json");
        }
        let space = match space.as_ref() {
            Some(handle) => &handle.0,
            None => return null_argument("space"),
        };
        let symbol = match utf8_arg(symbol, "symbol") {
            Ok(text) => text,
            Err(status) => return status,
        };
        let c_lp = if c_lp > 0.0 { c_lp } else { 4.0 };
        let spec = match quadrature(rel_tol) {
            Ok(spec) => spec,
            Err(e) => return fail(e),
        };
        match workbench::volterra_report(space, symbol, c_lp, None, &spec) {
            Ok(report) => give_string(out_json, report::render(&report)),
            Err(e) => fail(e),
        }
    })
}

/// Run the composition-operator analysis for a holomorphic self-map of the
/// upper half-plane, returning the rendered JSON report. Pass non-positive
/// `rel_tol` for the default tolerance. Release the string with
/// [`mslab_string_free`].
#[no_mangle]
pub unsafe extern "C" fn mslab_analyze_composition(
    space: *const MslabSpace,
    map: *const c_char,
    rel_tol: f64,
    out_json: *mut *mut c_char,
) -> MslabStatus {
    guarded(|| unsafe {
        if out_json.is_null() {
            return null_argument("out_json");
        }
        let space = match space.as_ref() {
            Some(handle) => &handle.0,
            None => return null_argument("space"),
        };
        let map = match utf8_arg(map, "map") {
            Ok(text) => text,
            Err(status) => return status,
        };
        let spec = match quadrature(rel_tol) {
            Ok(spec) => spec,
            Err(e) => return fail(e),
        };
        let scan = SupScanConfig::default();
        match workbench::composition_report(space, map, &scan, &spec) {
            Ok(report) => give_string(out_json, report::render(&report)),
            Err(e) => fail(e),
        }
    })
}
