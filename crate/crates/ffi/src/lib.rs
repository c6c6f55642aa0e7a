//! C ABI over `indexlab`.
//!
//! Objects are opaque handles created by `ix_*_new`/`ix_*_parse` style calls
//! and released with the matching `ix_*_free`. Every fallible call returns an
//! [`IxStatus`]; the message of the last failure on the calling thread is
//! available from [`ix_last_error`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use indexlab::bergman::{self, IndexEstimate, ToeplitzProblem};
use indexlab::calderon;
use indexlab::poly::MatPoly;
use indexlab::symbolcore::spec_file::{parse_operator_spec, parse_symbol};
use indexlab::symbolcore::{check_elliptic, Builtin, CosphereGrid, OperatorSpec};
use indexlab::tolerances::Tolerances;
use indexlab::topoindex::{self, CalibrationStore};
use indexlab::{CMat, Error, C64};

/// Result codes. `IX_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IxStatus {
    IxOk = 0,
    IxNullPointer = 1,
    IxInvalidInput = 2,
    IxParse = 3,
    IxNotElliptic = 4,
    IxNotInvertibleOnBoundary = 5,
    /// The estimate is still written to the output handle.
    IxIndexUnstable = 6,
    IxCalibrationRequired = 7,
    IxCalibrationFailure = 8,
    IxKernelFailure = 9,
    IxNumerical = 10,
    IxIo = 11,
    IxPanic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IxComplex {
    pub re: f64,
    pub im: f64,
}

/// Differential operator on the unit disc or interval.
pub struct IxOperator {
    spec: OperatorSpec,
}

/// Matrix-valued polynomial symbol `α(z, z̄)`.
pub struct IxSymbol {
    poly: MatPoly,
}

/// Numerical Toeplitz index estimate.
pub struct IxIndexEstimate {
    est: IndexEstimate,
}

/// Orientation calibration store.
pub struct IxCalibration {
    store: CalibrationStore,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> IxStatus {
    match err {
        Error::Parse { .. } => IxStatus::IxParse,
        Error::InvalidInput(_) => IxStatus::IxInvalidInput,
        Error::EllipticityViolation { .. } => IxStatus::IxNotElliptic,
        Error::NotInvertibleOnBoundary { .. } => IxStatus::IxNotInvertibleOnBoundary,
        Error::IndexUnstable(_) => IxStatus::IxIndexUnstable,
        Error::CalibrationRequired => IxStatus::IxCalibrationRequired,
        Error::CalibrationFailure(_) => IxStatus::IxCalibrationFailure,
        Error::KernelResolutionFailure(_) => IxStatus::IxKernelFailure,
        Error::Io(_) => IxStatus::IxIo,
        _ => IxStatus::IxNumerical,
    }
}

fn fail(err: Error) -> IxStatus {
    set_error(err.to_string());
    status_of(&err)
}

/// Run `f`, turning panics into `IxPanic`.
fn guard(f: impl FnOnce() -> IxStatus) -> IxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            IxStatus::IxPanic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, IxStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(IxStatus::IxNullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        IxStatus::IxInvalidInput
    })
}

unsafe fn schedule_arg(ptr: *const usize, len: usize) -> Result<Vec<usize>, IxStatus> {
    if len == 0 {
        return Ok(bergman::DEFAULT_SCHEDULE.to_vec());
    }
    if ptr.is_null() {
        set_error("null schedule with non-zero length");
        return Err(IxStatus::IxNullPointer);
    }
    Ok(std::slice::from_raw_parts(ptr, len).to_vec())
}

macro_rules! nonnull {
    ($($p:expr),+) => {
        if $($p.is_null())||+ {
            set_error("null pointer argument");
            return IxStatus::IxNullPointer;
        }
    };
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ix_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the last error message of this thread into `buf` (truncated,
/// NUL-terminated). Returns the full message length without the NUL.
#[no_mangle]
pub unsafe extern "C" fn ix_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map(|s| s.as_bytes()).unwrap_or(b"");
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Built-in operator by name: `cr`, `dbar<m>`, `laplacian`, `bilaplacian`, `wave`.
#[no_mangle]
pub unsafe extern "C" fn ix_operator_builtin(name: *const c_char, out: *mut *mut IxOperator) -> IxStatus {
    nonnull!(out);
    guard(|| {
        let name = tri!(str_arg(name));
        match Builtin::parse(name) {
            Some(b) => {
                *out = Box::into_raw(Box::new(IxOperator { spec: OperatorSpec::builtin(b) }));
                IxStatus::IxOk
            }
            None => fail(Error::InvalidInput(format!("unknown built-in operator `{name}`"))),
        }
    })
}

/// Operator from the TOML spec format.
#[no_mangle]
pub unsafe extern "C" fn ix_operator_parse(toml: *const c_char, out: *mut *mut IxOperator) -> IxStatus {
    nonnull!(out);
    guard(|| match parse_operator_spec(tri!(str_arg(toml))) {
        Ok(spec) => {
            *out = Box::into_raw(Box::new(IxOperator { spec }));
            IxStatus::IxOk
        }
        Err(e) => fail(e),
    })
}

/// Add the lower-order term `m · D^{(a,b)}`; `m` is `rank × rank`, row-major.
#[no_mangle]
pub unsafe extern "C" fn ix_operator_perturb(
    op: *mut IxOperator,
    a: u32,
    b: u32,
    m: *const IxComplex,
    len: usize,
) -> IxStatus {
    nonnull!(op, m);
    guard(|| {
        let op = &mut *op;
        let r = op.spec.rank_e;
        if len != r * r {
            return fail(Error::InvalidInput(format!("expected {} entries, got {len}", r * r)));
        }
        let vals = std::slice::from_raw_parts(m, len);
        let mat = CMat::from_fn(r, r, |i, j| C64::new(vals[i * r + j].re, vals[i * r + j].im));
        match op.spec.perturbed((a, b), mat) {
            Ok(s) => {
                op.spec = s;
                IxStatus::IxOk
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ix_operator_order(op: *const IxOperator) -> usize {
    op.as_ref().map_or(0, |o| o.spec.order)
}

#[no_mangle]
pub unsafe extern "C" fn ix_operator_rank(op: *const IxOperator) -> usize {
    op.as_ref().map_or(0, |o| o.spec.rank_e)
}

#[no_mangle]
pub unsafe extern "C" fn ix_operator_free(op: *mut IxOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Zero `size × size` symbol.
#[no_mangle]
pub unsafe extern "C" fn ix_symbol_new(size: usize, out: *mut *mut IxSymbol) -> IxStatus {
    nonnull!(out);
    if size == 0 {
        set_error("symbol size must be positive");
        return IxStatus::IxInvalidInput;
    }
    *out = Box::into_raw(Box::new(IxSymbol { poly: MatPoly::new(size) }));
    IxStatus::IxOk
}

/// Add `m z^a z̄^b`; `m` is `size × size`, row-major.
#[no_mangle]
pub unsafe extern "C" fn ix_symbol_add_term(
    sym: *mut IxSymbol,
    a: u32,
    b: u32,
    m: *const IxComplex,
    len: usize,
) -> IxStatus {
    nonnull!(sym, m);
    let sym = &mut *sym;
    let n = sym.poly.size;
    if len != n * n {
        set_error(format!("expected {} entries, got {len}", n * n));
        return IxStatus::IxInvalidInput;
    }
    let vals = std::slice::from_raw_parts(m, len);
    sym.poly.add_term(a, b, CMat::from_fn(n, n, |i, j| C64::new(vals[i * n + j].re, vals[i * n + j].im)));
    IxStatus::IxOk
}

/// Symbol from the TOML symbol format.
#[no_mangle]
pub unsafe extern "C" fn ix_symbol_parse(toml: *const c_char, out: *mut *mut IxSymbol) -> IxStatus {
    nonnull!(out);
    guard(|| match parse_symbol(tri!(str_arg(toml))) {
        Ok(poly) => {
            *out = Box::into_raw(Box::new(IxSymbol { poly }));
            IxStatus::IxOk
        }
        Err(e) => fail(e),
    })
}

/// Evaluate at `z`; writes `size²` entries row-major into `out`.
#[no_mangle]
pub unsafe extern "C" fn ix_symbol_eval(sym: *const IxSymbol, z: IxComplex, out: *mut IxComplex, cap: usize) -> IxStatus {
    nonnull!(sym, out);
    let sym = &*sym;
    let n = sym.poly.size;
    if cap < n * n {
        set_error(format!("output needs {} entries", n * n));
        return IxStatus::IxInvalidInput;
    }
    let v = sym.poly.eval(C64::new(z.re, z.im));
    for i in 0..n {
        for j in 0..n {
            *out.add(i * n + j) = IxComplex { re: v[(i, j)].re, im: v[(i, j)].im };
        }
    }
    IxStatus::IxOk
}

#[no_mangle]
pub unsafe extern "C" fn ix_symbol_free(sym: *mut IxSymbol) {
    if !sym.is_null() {
        drop(Box::from_raw(sym));
    }
}

/// Smallest distance of a boundary-symbol root from the real axis over a
/// grid of `points` boundary points per fiber component.
#[no_mangle]
pub unsafe extern "C" fn ix_ellipticity_margin(op: *const IxOperator, points: usize, margin: *mut f64) -> IxStatus {
    nonnull!(op, margin);
    guard(|| {
        let spec = &(*op).spec;
        let grid = CosphereGrid::for_spec(spec, points.max(4));
        match check_elliptic(spec, &grid, &Tolerances::default()) {
            Ok(rep) => {
                *margin = rep.min_distance;
                if rep.pass {
                    IxStatus::IxOk
                } else {
                    set_error(format!("root within {:e} of the real axis", rep.min_distance));
                    IxStatus::IxNotElliptic
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// Largest disagreement between the two Calderón symbol routes, and the
/// ranks of `E₊` on the two fiber components.
#[no_mangle]
pub unsafe extern "C" fn ix_calderon_check(
    op: *const IxOperator,
    points: usize,
    disagreement: *mut f64,
    ranks: *mut usize,
) -> IxStatus {
    nonnull!(op, disagreement);
    guard(|| {
        let spec = &(*op).spec;
        let grid = CosphereGrid::for_spec(spec, points.max(4));
        match calderon::calderon_report(spec, &grid, &Tolerances::default()) {
            Ok(rep) => {
                *disagreement = rep.max_disagreement;
                if !ranks.is_null() {
                    for (k, r) in rep.ranks.iter().take(2).enumerate() {
                        *ranks.add(k) = *r;
                    }
                }
                IxStatus::IxOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Numerical index of `P α P` over a truncation schedule (`len == 0` uses
/// the default). On `IxIndexUnstable` the estimate is still returned.
#[no_mangle]
pub unsafe extern "C" fn ix_numerical_index(
    op: *const IxOperator,
    sym: *const IxSymbol,
    schedule: *const usize,
    len: usize,
    out: *mut *mut IxIndexEstimate,
) -> IxStatus {
    nonnull!(op, sym, out);
    guard(|| {
        let schedule = tri!(schedule_arg(schedule, len));
        let problem = match ToeplitzProblem::new(&(*op).spec, (*sym).poly.clone(), schedule, Tolerances::default()) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match bergman::numerical_index(&problem) {
            Ok(est) => {
                *out = Box::into_raw(Box::new(IxIndexEstimate { est }));
                IxStatus::IxOk
            }
            Err(Error::IndexUnstable(est)) => {
                set_error("index did not stabilize across the truncation schedule");
                *out = Box::into_raw(Box::new(IxIndexEstimate { est: *est }));
                IxStatus::IxIndexUnstable
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ix_index_value(est: *const IxIndexEstimate) -> i64 {
    est.as_ref().map_or(0, |e| e.est.index)
}

#[no_mangle]
pub unsafe extern "C" fn ix_index_dims(est: *const IxIndexEstimate, dim_ker: *mut usize, dim_coker: *mut usize) -> IxStatus {
    nonnull!(est, dim_ker, dim_coker);
    *dim_ker = (*est).est.dim_ker;
    *dim_coker = (*est).est.dim_coker;
    IxStatus::IxOk
}

#[no_mangle]
pub unsafe extern "C" fn ix_index_stabilized(est: *const IxIndexEstimate) -> bool {
    est.as_ref().is_some_and(|e| e.est.stabilized)
}

#[no_mangle]
pub unsafe extern "C" fn ix_index_confident(est: *const IxIndexEstimate) -> bool {
    est.as_ref().is_some_and(|e| e.est.confident)
}

#[no_mangle]
pub unsafe extern "C" fn ix_index_gap_ratio(est: *const IxIndexEstimate) -> f64 {
    est.as_ref().map_or(f64::NAN, |e| e.est.gap_ratio)
}

#[no_mangle]
pub unsafe extern "C" fn ix_index_estimate_free(est: *mut IxIndexEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Fix the orientation signs against the reference case.
#[no_mangle]
pub unsafe extern "C" fn ix_calibrate(schedule: *const usize, len: usize, out: *mut *mut IxCalibration) -> IxStatus {
    nonnull!(out);
    guard(|| {
        let schedule = tri!(schedule_arg(schedule, len));
        match topoindex::calibrate_orientation(&schedule, &Tolerances::default()) {
            Ok(store) => {
                *out = Box::into_raw(Box::new(IxCalibration { store }));
                IxStatus::IxOk
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ix_calibration_load(path: *const c_char, out: *mut *mut IxCalibration) -> IxStatus {
    nonnull!(out);
    guard(|| match CalibrationStore::load(Path::new(tri!(str_arg(path)))) {
        Ok(store) => {
            *out = Box::into_raw(Box::new(IxCalibration { store }));
            IxStatus::IxOk
        }
        Err(e) => fail(e),
    })
}

#[no_mangle]
pub unsafe extern "C" fn ix_calibration_save(cal: *const IxCalibration, path: *const c_char) -> IxStatus {
    nonnull!(cal);
    guard(|| match (*cal).store.save(Path::new(tri!(str_arg(path)))) {
        Ok(()) => IxStatus::IxOk,
        Err(e) => fail(e),
    })
}

/// Orientation signs for the `ξ' > 0` and `ξ' < 0` components.
#[no_mangle]
pub unsafe extern "C" fn ix_calibration_signs(cal: *const IxCalibration, plus: *mut i64, minus: *mut i64) -> IxStatus {
    nonnull!(cal, plus, minus);
    let [p, m] = (*cal).store.signs();
    *plus = p;
    *minus = m;
    IxStatus::IxOk
}

#[no_mangle]
pub unsafe extern "C" fn ix_calibration_free(cal: *mut IxCalibration) {
    if !cal.is_null() {
        drop(Box::from_raw(cal));
    }
}

/// Winding-number index `Σ s_σ · rank E₊,σ · wind det α`.
#[no_mangle]
pub unsafe extern "C" fn ix_topological_index(
    op: *const IxOperator,
    sym: *const IxSymbol,
    cal: *const IxCalibration,
    out: *mut i64,
) -> IxStatus {
    nonnull!(op, sym, out);
    guard(|| {
        let store = cal.as_ref().map(|c| &c.store);
        match topoindex::topological_index(
            &(*op).spec,
            &(*sym).poly,
            store,
            CosphereGrid::DEFAULT_POINTS,
            &Tolerances::default(),
        ) {
            Ok(rep) => {
                *out = rep.combined;
                IxStatus::IxOk
            }
            Err(e) => fail(e),
        }
    })
}
