//! C interface to `holderclt`.
//!
//! Every fallible function returns an [`HcStatus`] and writes results through
//! out-pointers. After a failure, [`hc_last_error`] copies a message for the
//! calling thread. Objects are opaque handles created by `hc_*_new`-style
//! functions and released with the matching `hc_*_free`; passing NULL to a
//! free function is a no-op. No function unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::os::raw::c_int;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use holderclt::fields::{simulate, Covariance, FieldModel, Innovation, PathEnsemble};
use holderclt::geometry::{fit_ball_exponent, MetricMeasureSpace};
use holderclt::holder::{fractional_sobolev_norm, grr_audit, holder_norm, power_distance, Grid, GridField, GrrOptions};
use holderclt::orlicz::{orlicz_norm, EmpiricalSample, YoungFunction};
use holderclt::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Covariance families for [`hc_model_gaussian`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcCovariance {
    Brownian = 0,
    /// `param` is the Hurst index.
    FractionalBrownian = 1,
    BrownianSheet = 2,
    /// `param` is the mean-reversion rate.
    OrnsteinUhlenbeck = 3,
    Zero = 4,
}

/// Coefficient laws for [`hc_model_series`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcInnovation {
    Rademacher = 0,
    Uniform = 1,
    Gaussian = 2,
    /// Uses `tail_index`.
    SymmetricPareto = 3,
}

/// Opaque Young function.
pub struct HcYoung(YoungFunction);

/// Opaque field model.
pub struct HcModel(FieldModel);

/// Opaque ensemble of simulated paths.
pub struct HcEnsemble(PathEnsemble);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HcStatus {
    if e.is_numerical() {
        HcStatus::Numerical
    } else {
        HcStatus::InvalidInput
    }
}

fn guard<F: FnOnce() -> Result<(), HcStatus>>(f: F) -> HcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            HcStatus::Panic
        }
    }
}

fn fail(e: Error) -> HcStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null() -> HcStatus {
    set_error("null pointer argument".into());
    HcStatus::NullPointer
}

unsafe fn view<'a, T>(p: *const T, len: usize) -> Result<&'a [T], HcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), HcStatus> {
    if out.is_null() {
        return Err(null());
    }
    out.write(v);
    Ok(())
}

unsafe fn field_from(values: *const f64, shape: *const usize, dim: usize) -> Result<GridField, HcStatus> {
    let shape = view(shape, dim)?.to_vec();
    let grid = Grid::new(shape).map_err(fail)?;
    let v = view(values, grid.len())?.to_vec();
    GridField::new(grid, v).map_err(fail)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// `Φ(z) = |z|^p`, `p ≥ 1`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hc_young_power(p: f64, out: *mut *mut HcYoung) -> HcStatus {
    guard(|| {
        let y = YoungFunction::power(p).map_err(fail)?;
        put(out, Box::into_raw(Box::new(HcYoung(y))))
    })
}

/// `Φ(z) = exp(z²) − 1`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hc_young_exp_quadratic(out: *mut *mut HcYoung) -> HcStatus {
    guard(|| put(out, Box::into_raw(Box::new(HcYoung(YoungFunction::exp_quadratic())))))
}

/// # Safety
/// `y` must be NULL or a handle from an `hc_young_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn hc_young_free(y: *mut HcYoung) {
    if !y.is_null() {
        drop(Box::from_raw(y));
    }
}

/// `Φ(z)`.
///
/// # Safety
/// `y` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn hc_young_eval(y: *const HcYoung, z: f64, out: *mut f64) -> HcStatus {
    guard(|| {
        let y = y.as_ref().ok_or_else(null)?;
        put(out, y.0.eval(z))
    })
}

/// Luxemburg norm of the uniform empirical law of `values`.
///
/// # Safety
/// `values` must point to `len` doubles; `y` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_orlicz_norm(values: *const f64, len: usize, y: *const HcYoung, out: *mut f64) -> HcStatus {
    guard(|| {
        let y = y.as_ref().ok_or_else(null)?;
        let s = EmpiricalSample::uniform(view(values, len)?.to_vec()).map_err(fail)?;
        put(out, orlicz_norm(&s, &y.0).map_err(fail)?)
    })
}

/// Hölder norm of a grid field (row-major, last axis fastest) under the
/// distance `|x − y|^beta`.
///
/// # Safety
/// `shape` must point to `dim` sizes and `values` to their product of doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_holder_norm(
    values: *const f64,
    shape: *const usize,
    dim: usize,
    beta: f64,
    out: *mut f64,
) -> HcStatus {
    guard(|| {
        let f = field_from(values, shape, dim)?;
        let h = holder_norm(&f, power_distance(f.grid(), beta)).map_err(fail)?;
        put(out, h.norm)
    })
}

/// Fractional Sobolev norm `W(α, p)` of a grid field; `alpha` has `dim` entries.
///
/// # Safety
/// As for [`hc_holder_norm`]; `alpha` must point to `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_sobolev_norm(
    values: *const f64,
    shape: *const usize,
    dim: usize,
    alpha: *const f64,
    p: f64,
    out: *mut f64,
) -> HcStatus {
    guard(|| {
        let f = field_from(values, shape, dim)?;
        let a = view(alpha, dim)?;
        put(out, fractional_sobolev_norm(&f, a, p).map_err(fail)?)
    })
}

/// Garsia–Rodemich–Rumsey audit of one field; writes the violation count and
/// the worst ratio of the left side to the bound.
///
/// # Safety
/// As for [`hc_sobolev_norm`]; both out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_grr_audit(
    values: *const f64,
    shape: *const usize,
    dim: usize,
    alpha: *const f64,
    p: f64,
    seed: u64,
    violations: *mut usize,
    worst_ratio: *mut f64,
) -> HcStatus {
    guard(|| {
        let f = field_from(values, shape, dim)?;
        let a = view(alpha, dim)?;
        let opts = GrrOptions { seed, ..GrrOptions::default() };
        let r = grr_audit(&f, a, p, &opts).map_err(fail)?;
        put(violations, r.violations)?;
        put(worst_ratio, r.worst_ratio)
    })
}

/// Ball exponent `θ` and constant `C(θ)` of the uniform measure on a grid of
/// `[0, 1]^dim` with the Euclidean distance.
///
/// # Safety
/// `shape` must point to `dim` sizes; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_fit_ball_exponent(
    shape: *const usize,
    dim: usize,
    theta: *mut f64,
    c_theta: *mut f64,
) -> HcStatus {
    guard(|| {
        let grid = Grid::new(view(shape, dim)?.to_vec()).map_err(fail)?;
        let fit = fit_ball_exponent(&MetricMeasureSpace::uniform_grid(&grid)).map_err(fail)?;
        put(theta, fit.theta)?;
        put(c_theta, fit.c_theta)
    })
}

/// Gaussian model with the given covariance; `param` is read only by the
/// parametrised families.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hc_model_gaussian(kind: HcCovariance, param: f64, out: *mut *mut HcModel) -> HcStatus {
    guard(|| {
        let cov = match kind {
            HcCovariance::Brownian => Covariance::Brownian,
            HcCovariance::FractionalBrownian => Covariance::FractionalBrownian { hurst: param },
            HcCovariance::BrownianSheet => Covariance::BrownianSheet,
            HcCovariance::OrnsteinUhlenbeck => Covariance::OrnsteinUhlenbeck { rate: param },
            HcCovariance::Zero => Covariance::Zero,
        };
        put(out, Box::into_raw(Box::new(HcModel(FieldModel::gaussian(cov)))))
    })
}

/// Sine series `Σ k^{-decay} ζ_k √2 sin(kπx)` with `terms` terms.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hc_model_series(
    decay: f64,
    terms: usize,
    law: HcInnovation,
    tail_index: f64,
    out: *mut *mut HcModel,
) -> HcStatus {
    guard(|| {
        let law = match law {
            HcInnovation::Rademacher => Innovation::Rademacher,
            HcInnovation::Uniform => Innovation::Uniform,
            HcInnovation::Gaussian => Innovation::Gaussian,
            HcInnovation::SymmetricPareto => Innovation::SymmetricPareto { tail_index },
        };
        let m = FieldModel::series(decay, terms, law).map_err(fail)?;
        put(out, Box::into_raw(Box::new(HcModel(m))))
    })
}

/// # Safety
/// `m` must be NULL or a handle from an `hc_model_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn hc_model_free(m: *mut HcModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Simulates `replicas` paths of `model` on a grid of `[0, 1]^dim`. The result
/// depends only on the model, grid, replica count and seed.
///
/// # Safety
/// `model` and `out` must be valid; `shape` must point to `dim` sizes.
#[no_mangle]
pub unsafe extern "C" fn hc_simulate(
    model: *const HcModel,
    shape: *const usize,
    dim: usize,
    replicas: usize,
    seed: u64,
    out: *mut *mut HcEnsemble,
) -> HcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        let grid = Grid::new(view(shape, dim)?.to_vec()).map_err(fail)?;
        let e = simulate(&m.0, &grid, replicas, seed).map_err(fail)?;
        put(out, Box::into_raw(Box::new(HcEnsemble(e))))
    })
}

/// # Safety
/// `e` must be NULL or a handle from [`hc_simulate`], freed once.
#[no_mangle]
pub unsafe extern "C" fn hc_ensemble_free(e: *mut HcEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Number of replicas and of grid points per path.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hc_ensemble_size(e: *const HcEnsemble, replicas: *mut usize, points: *mut usize) -> HcStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(null)?;
        put(replicas, e.0.replicas())?;
        put(points, e.0.grid().len())
    })
}

/// Copies path `replica` into `buf`, which must hold at least the number of
/// grid points.
///
/// # Safety
/// `e` must be valid and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hc_ensemble_path(e: *const HcEnsemble, replica: usize, buf: *mut f64, len: usize) -> HcStatus {
    guard(|| {
        let e = e.as_ref().ok_or_else(null)?;
        if replica >= e.0.replicas() {
            set_error(format!("replica {replica} out of range"));
            return Err(HcStatus::InvalidInput);
        }
        let p = e.0.path(replica);
        if len < p.len() {
            set_error(format!("buffer holds {len} values, path has {}", p.len()));
            return Err(HcStatus::BufferTooSmall);
        }
        if buf.is_null() {
            return Err(null());
        }
        ptr::copy_nonoverlapping(p.as_ptr(), buf, p.len());
        Ok(())
    })
}

/// Returns 1 when `status` is [`HcStatus::Ok`]; convenience for C callers.
#[no_mangle]
pub extern "C" fn hc_ok(status: HcStatus) -> c_int {
    c_int::from(status == HcStatus::Ok)
}

/// Reads a NUL-terminated message, for tests and Rust callers.
///
/// # Safety
/// `p` must point to a NUL-terminated string.
pub unsafe fn c_str(p: *const c_char) -> String {
    CStr::from_ptr(p).to_string_lossy().into_owned()
}
