//! C ABI over `heisenvt`.
//!
//! Handles are opaque and owned by the caller: every `*_new` has a matching
//! `*_free`, and strings returned through `char **` are released with
//! `hvt_string_free`. Functions return an `HvtStatus`; on failure the message
//! is available from `hvt_last_error` on the same thread until the next call.
//! Complex data crosses the boundary as interleaved `(re, im)` doubles in
//! quotient index order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use heisenvt::cli::parse_spec;
use heisenvt::dual::{enumerate_dual, verify_peter_weyl};
use heisenvt::group::{Heisenberg, LevelFunction};
use heisenvt::operators::apply_operator;
use heisenvt::spectral::{oracle_spectrum, Mode, DENSE_BUDGET, VERSION};
use heisenvt::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidPrime = 3,
    BudgetExceeded = 4,
    Precision = 5,
    Format = 6,
    Overflow = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvtSpectrumMode {
    Dense = 0,
    Block = 1,
    Closed = 2,
}

/// A quotient `H_d(Z/p^n)`.
pub struct HvtContext {
    group: Heisenberg,
}

/// A function on a quotient.
pub struct HvtLevelFunction {
    inner: LevelFunction,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HvtStatus {
    match e {
        Error::InvalidPrime(_) | Error::PrimeMismatch(..) => HvtStatus::InvalidPrime,
        Error::BudgetExceeded { .. } => HvtStatus::BudgetExceeded,
        Error::InsufficientPrecision { .. } | Error::LevelMismatch { .. } => HvtStatus::Precision,
        Error::Format(_) | Error::NotPPower(_) => HvtStatus::Format,
        Error::Overflow { .. } => HvtStatus::Overflow,
        _ => HvtStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (HvtStatus, String)>) -> HvtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HvtStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            HvtStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (HvtStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HvtStatus, String) {
    (HvtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (HvtStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (HvtStatus::Format, format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no interior nul").into_raw()
}

/// Message of the last failed call on this thread (empty after success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hvt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hvt_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr() as *const c_char
}

/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn hvt_context_new(p: u64, d: u32, n: u32, out: *mut *mut HvtContext) -> HvtStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let group = Heisenberg::new(p, d as usize, n).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(HvtContext { group }));
        Ok(())
    })
}

/// # Safety
/// `ctx` must come from `hvt_context_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hvt_context_free(ctx: *mut HvtContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Number of points `p^{n(2d+1)}` of the quotient.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvt_context_points(ctx: *const HvtContext, out: *mut usize) -> HvtStatus {
    guard(|| {
        let ctx = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ctx.group.num_points().map_err(lib_err)?;
        Ok(())
    })
}

/// Number of labels in the dual ball `B(n)`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvt_dual_count(ctx: *const HvtContext, out: *mut usize) -> HvtStatus {
    guard(|| {
        let ctx = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = enumerate_dual(&ctx.group).len();
        Ok(())
    })
}

/// `Σ d_π²` over `B(n)` and `|G/G_n|`; `HVT_STATUS_OVERFLOW` if either
/// exceeds 64 bits.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvt_peter_weyl(ctx: *const HvtContext, sum: *mut u64, order: *mut u64) -> HvtStatus {
    guard(|| {
        let ctx = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        let (s, o) = verify_peter_weyl(&ctx.group);
        let s: u64 = s.try_into().map_err(|_| (HvtStatus::Overflow, "sum exceeds 64 bits".to_string()))?;
        let o: u64 = o.try_into().map_err(|_| (HvtStatus::Overflow, "order exceeds 64 bits".to_string()))?;
        *sum.as_mut().ok_or_else(|| null("sum"))? = s;
        *order.as_mut().ok_or_else(|| null("order"))? = o;
        Ok(())
    })
}

/// Copies `len` interleaved `(re, im)` pairs into a new function; `len` must
/// equal the number of points.
///
/// # Safety
/// `data` must point to `2 * len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hvt_function_new(
    ctx: *const HvtContext,
    data: *const f64,
    len: usize,
    out: *mut *mut HvtLevelFunction,
) -> HvtStatus {
    guard(|| {
        let ctx = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let raw = std::slice::from_raw_parts(data, 2 * len);
        let values = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let inner = LevelFunction::new(ctx.group, values).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(HvtLevelFunction { inner }));
        Ok(())
    })
}

/// Number of points of `f`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hvt_function_len(f: *const HvtLevelFunction, out: *mut usize) -> HvtStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = f.inner.data().len();
        Ok(())
    })
}

/// Copies the values of `f` into `out` as interleaved pairs; `len` is the
/// capacity in points and must be at least `hvt_function_len`.
///
/// # Safety
/// `out` must point to `2 * len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hvt_function_data(f: *const HvtLevelFunction, out: *mut f64, len: usize) -> HvtStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let data = f.inner.data();
        if len < data.len() {
            return Err((HvtStatus::InvalidArgument, format!("len: need {} points, got {len}", data.len())));
        }
        let dst = std::slice::from_raw_parts_mut(out, 2 * data.len());
        for (i, v) in data.iter().enumerate() {
            dst[2 * i] = v.re;
            dst[2 * i + 1] = v.im;
        }
        Ok(())
    })
}

/// # Safety
/// `f` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hvt_function_free(f: *mut HvtLevelFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Applies the operator described by `spec` (compact form such as
/// `sublaplacian:alpha=1`, or JSON) to `f` by exact quadrature.
///
/// # Safety
/// Pointers must be valid; `spec` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hvt_apply_operator(
    spec: *const c_char,
    f: *const HvtLevelFunction,
    out: *mut *mut HvtLevelFunction,
) -> HvtStatus {
    guard(|| {
        let spec = c_str(spec, "spec")?;
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = f.inner.ctx();
        let spec = parse_spec(spec, g.prime(), g.d()).map_err(lib_err)?;
        let inner = apply_operator(&spec, &f.inner).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(HvtLevelFunction { inner }));
        Ok(())
    })
}

/// Spectrum report as JSON (release with `hvt_string_free`).
///
/// # Safety
/// Pointers must be valid; `spec` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hvt_spectrum_json(
    ctx: *const HvtContext,
    spec: *const c_char,
    mode: HvtSpectrumMode,
    out: *mut *mut c_char,
) -> HvtStatus {
    guard(|| {
        let ctx = ctx.as_ref().ok_or_else(|| null("ctx"))?;
        let spec = c_str(spec, "spec")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = parse_spec(spec, ctx.group.prime(), ctx.group.d()).map_err(lib_err)?;
        let mode = match mode {
            HvtSpectrumMode::Dense => Mode::Dense,
            HvtSpectrumMode::Block => Mode::Block,
            HvtSpectrumMode::Closed => Mode::Closed,
        };
        let report = oracle_spectrum(&spec, &ctx.group, mode, DENSE_BUDGET).map_err(lib_err)?;
        let json = serde_json::to_string(&report).map_err(|e| (HvtStatus::Format, e.to_string()))?;
        *out = into_c_string(json);
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hvt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Full version string, e.g. for report provenance.
#[no_mangle]
pub extern "C" fn hvt_version_string() -> *mut c_char {
    into_c_string(VERSION.to_string())
}
