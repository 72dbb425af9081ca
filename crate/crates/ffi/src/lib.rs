//! C interface to `gendyn`.
//!
//! Every function returns a [`GendynStatus`] and writes results through out
//! pointers. On failure the message is available from
//! [`gendyn_last_error_message`] on the same thread. Matrices cross the
//! boundary as row-major `double` buffers. Handles are opaque and must be
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gendyn::dynamics::{s_of_t, t_of_s, transition_time, DynamicsParams};
use gendyn::harness::{simulate, ExperimentConfig, RunKind};
use gendyn::rmt::{mp_density, overlap, sbar_of_shat, shat_of_sbar, SpectrumParams};
use gendyn::shrinkage::shrink_denoise;
use gendyn::simulator::ErrorTrace;
use gendyn::theory::{
    minimize_curve, oversampled_equivalent, TheoryConfig, TheoryModel, UndersampledModel,
};
use gendyn::transfer::{rank1_pair, transfer_benefit_theory};
use gendyn::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GendynStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigParse = 3,
    DimensionMismatch = 4,
    NotDetectable = 5,
    BelowThreshold = 6,
    InvalidInit = 7,
    OutOfRange = 8,
    EmptyRegion = 9,
    Divergence = 10,
    SamplingRegime = 11,
    Io = 12,
    /// A Rust panic was caught at the boundary.
    Internal = 99,
}

impl From<&Error> for GendynStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ConfigInvalid(_) | Error::NonPositiveMode(_) | Error::UnknownFigure(_) => {
                GendynStatus::InvalidArgument
            }
            Error::ConfigParse(_) => GendynStatus::ConfigParse,
            Error::DimError(_) | Error::AspectError(_) | Error::TooFewModes { .. } => {
                GendynStatus::DimensionMismatch
            }
            Error::NotDetectable { .. } => GendynStatus::NotDetectable,
            Error::BelowThreshold { .. } => GendynStatus::BelowThreshold,
            Error::InvalidInit { .. } => GendynStatus::InvalidInit,
            Error::OutOfRange { .. } => GendynStatus::OutOfRange,
            Error::EmptyRegion { .. } | Error::NoiseScaleUnknown(_) | Error::SingularGram(_) => {
                GendynStatus::EmptyRegion
            }
            Error::Divergence { .. } => GendynStatus::Divergence,
            Error::ModeError(_) | Error::RegimeError(_) | Error::MissingDataset => {
                GendynStatus::SamplingRegime
            }
            Error::Io { .. } => GendynStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, records any error or panic, and turns it into a status code.
fn guard(f: impl FnOnce() -> Result<(), GendynError>) -> GendynStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GendynStatus::Ok,
        Ok(Err(e)) => {
            let status = e.status;
            set_last_error(e.message);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {msg}"));
            GendynStatus::Internal
        }
    }
}

struct GendynError {
    status: GendynStatus,
    message: String,
}

impl From<Error> for GendynError {
    fn from(e: Error) -> Self {
        GendynError {
            status: GendynStatus::from(&e),
            message: e.to_string(),
        }
    }
}

fn null(name: &str) -> GendynError {
    GendynError {
        status: GendynStatus::NullPointer,
        message: format!("{name} is NULL"),
    }
}

fn invalid(message: String) -> GendynError {
    GendynError {
        status: GendynStatus::InvalidArgument,
        message,
    }
}

unsafe fn write<T>(out: *mut T, name: &str, value: T) -> Result<(), GendynError> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(data: *const T, len: usize, name: &str) -> Result<&'a [T], GendynError> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn dims(depth: u32, eps: f64, tau: f64) -> Result<DynamicsParams, GendynError> {
    Ok(DynamicsParams::new(eps, tau, depth as usize)?)
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next `gendyn_*` call on this thread.
#[no_mangle]
pub extern "C" fn gendyn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gendyn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// Random matrix spectra

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GendynOverlap {
    pub o_u: f64,
    pub o_v: f64,
    pub o: f64,
}

/// Position of the data singular value produced by a teacher mode of size `sbar`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_shat_of_sbar(sbar: f64, aspect: f64, scale: f64, out: *mut f64) -> GendynStatus {
    guard(|| {
        let p = SpectrumParams::with_scale(aspect, scale)?;
        write(out, "out", shat_of_sbar(sbar, &p))
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_sbar_of_shat(shat: f64, aspect: f64, scale: f64, out: *mut f64) -> GendynStatus {
    guard(|| {
        let p = SpectrumParams::with_scale(aspect, scale)?;
        write(out, "out", sbar_of_shat(shat, &p)?)
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_overlap(sbar: f64, aspect: f64, scale: f64, out: *mut GendynOverlap) -> GendynStatus {
    guard(|| {
        let p = SpectrumParams::with_scale(aspect, scale)?;
        let o = overlap(sbar, &p);
        write(
            out,
            "out",
            GendynOverlap {
                o_u: o.o_u,
                o_v: o.o_v,
                o: o.o,
            },
        )
    })
}

/// Marchenko–Pastur density of singular values.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_mp_density(shat: f64, aspect: f64, scale: f64, out: *mut f64) -> GendynStatus {
    guard(|| {
        let p = SpectrumParams::with_scale(aspect, scale)?;
        write(out, "out", mp_density(shat, &p))
    })
}

// Mode dynamics

/// Strength at time `t` of a mode growing from `eps` towards `shat`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_s_of_t(
    t: f64,
    shat: f64,
    eps: f64,
    tau: f64,
    depth: u32,
    out: *mut f64,
) -> GendynStatus {
    guard(|| write(out, "out", s_of_t(t, shat, &dims(depth, eps, tau)?)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_t_of_s(
    s: f64,
    shat: f64,
    eps: f64,
    tau: f64,
    depth: u32,
    out: *mut f64,
) -> GendynStatus {
    guard(|| write(out, "out", t_of_s(s, shat, &dims(depth, eps, tau)?)?))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_transition_time(
    shat: f64,
    eps: f64,
    tau: f64,
    depth: u32,
    out: *mut f64,
) -> GendynStatus {
    guard(|| write(out, "out", transition_time(shat, &dims(depth, eps, tau)?)?))
}

// Learning curves

enum Curves {
    Full(TheoryModel),
    Undersampled(UndersampledModel),
}

/// Prepared train/test error curves for one teacher and student setup.
pub struct GendynTheory {
    curves: Curves,
    tau: f64,
}

impl GendynTheory {
    fn test_error(&self, t: f64) -> gendyn::Result<f64> {
        match &self.curves {
            Curves::Full(m) => m.test_error(t),
            Curves::Undersampled(m) => m.test_error(t),
        }
    }
}

/// Builds the curves for teacher singular values `snrs[0..n_snrs]` (descending).
/// `n2 = 0` means a full-width student (N₂ = N₃) and `samples = 0` means P = N₁.
///
/// # Safety
/// `snrs` must point to `n_snrs` doubles; `out` must be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gendyn_theory_new(
    snrs: *const f64,
    n_snrs: usize,
    n1: usize,
    n3: usize,
    n2: usize,
    samples: usize,
    eps: f64,
    depth: u32,
    out: *mut *mut GendynTheory,
) -> GendynStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let snrs = slice(snrs, n_snrs, "snrs")?.to_vec();
        let dynamics = dims(depth, eps, 1.0)?;
        let mut cfg = TheoryConfig::new(snrs, n1, n3, dynamics)?;
        if n2 > 0 {
            cfg = cfg.with_student_rank(n2)?;
        }
        if samples > 0 {
            cfg = cfg.with_samples(samples)?;
        }
        let curves = if cfg.sample_count < cfg.n1 {
            Curves::Undersampled(UndersampledModel::new(&cfg)?)
        } else if cfg.sample_count > cfg.n1 {
            Curves::Full(TheoryModel::new(&oversampled_equivalent(&cfg)?)?)
        } else {
            Curves::Full(TheoryModel::new(&cfg)?)
        };
        let handle = Box::new(GendynTheory {
            curves,
            tau: dynamics.tau(),
        });
        write(out, "out", Box::into_raw(handle))
    })
}

/// # Safety
/// `handle` must come from `gendyn_theory_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gendyn_theory_free(handle: *mut GendynTheory) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Relative test error at time `t` (units of τ).
///
/// # Safety
/// `handle` must be live and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_theory_test_error(handle: *const GendynTheory, t: f64, out: *mut f64) -> GendynStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        write(out, "out", h.test_error(t)?)
    })
}

/// Relative train error at time `t`. Undersampled setups have no train curve
/// and return `GENDYN_STATUS_SAMPLING_REGIME`.
///
/// # Safety
/// `handle` must be live and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_theory_train_error(handle: *const GendynTheory, t: f64, out: *mut f64) -> GendynStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        match &h.curves {
            Curves::Full(m) => write(out, "out", m.train_error(t)?),
            Curves::Undersampled(_) => Err(Error::RegimeError("no train error curve for P < N1".into()).into()),
        }
    })
}

/// Optimal early-stopping time and the test error reached there.
///
/// # Safety
/// `handle` must be live; `t_opt` and `eps_min` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_theory_optimal_stopping(
    handle: *const GendynTheory,
    t_opt: *mut f64,
    eps_min: *mut f64,
) -> GendynStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        if t_opt.is_null() || eps_min.is_null() {
            return Err(null("t_opt or eps_min"));
        }
        let (t, e) = minimize_curve(|t| h.test_error(t), h.tau)?;
        write(t_opt, "t_opt", t)?;
        write(eps_min, "eps_min", e)
    })
}

// Simulation

/// Error trace of one gradient-descent run.
pub struct GendynTrace {
    trace: ErrorTrace,
}

/// Trains one student described by a TOML experiment config (the same format
/// as `gendyn simulate --config`). The config's `kind` is ignored.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn gendyn_simulate(config_toml: *const c_char, seed: u64, out: *mut *mut GendynTrace) -> GendynStatus {
    guard(|| {
        if config_toml.is_null() {
            return Err(null("config_toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(config_toml)
            .to_str()
            .map_err(|e| invalid(format!("config is not UTF-8: {e}")))?;
        let cfg = ExperimentConfig::from_toml_as(text, RunKind::Simulate)?;
        cfg.validate()?;
        let trace = simulate(&cfg, seed)?;
        write(out, "out", Box::into_raw(Box::new(GendynTrace { trace })))
    })
}

/// # Safety
/// `handle` must come from `gendyn_simulate` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gendyn_trace_free(handle: *mut GendynTrace) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of recorded points. 0 for a NULL handle.
///
/// # Safety
/// `handle` must be live or NULL.
#[no_mangle]
pub unsafe extern "C" fn gendyn_trace_len(handle: *const GendynTrace) -> usize {
    handle.as_ref().map_or(0, |h| h.trace.len())
}

/// Copies times (units of τ), train and test errors into caller buffers of
/// length `len`, which must equal `gendyn_trace_len`. Any buffer may be NULL.
///
/// # Safety
/// `handle` must be live; non-NULL buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gendyn_trace_copy(
    handle: *const GendynTrace,
    times: *mut f64,
    train: *mut f64,
    test: *mut f64,
    len: usize,
) -> GendynStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(|| null("handle"))?;
        let tr = &h.trace;
        if len != tr.len() {
            return Err(Error::DimError(format!("buffer length {len}, trace has {}", tr.len())).into());
        }
        for (dst, src) in [(times, &tr.times), (train, &tr.train), (test, &tr.test)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
            }
        }
        Ok(())
    })
}

// Shrinkage

/// Denoises a `rows × cols` row-major matrix in place of `out` (same shape).
/// `aspect <= 0` takes min(rows, cols)/max(rows, cols); the noise scale is
/// `scale`. `n_detected` (may be NULL) receives the number of kept modes.
///
/// # Safety
/// `data` and `out` must hold `rows * cols` doubles; they may alias.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gendyn_shrink(
    data: *const f64,
    rows: usize,
    cols: usize,
    aspect: f64,
    scale: f64,
    margin: f64,
    out: *mut f64,
    n_detected: *mut usize,
) -> GendynStatus {
    guard(|| {
        let n = rows.checked_mul(cols).ok_or_else(|| invalid("matrix size overflows".into()))?;
        if n == 0 {
            return Err(Error::DimError(format!("empty {rows}x{cols} matrix")).into());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let m = DMatrix::from_row_slice(rows, cols, slice(data, n, "data")?);
        let params = if aspect > 0.0 {
            SpectrumParams::with_scale(aspect, scale)?
        } else {
            SpectrumParams::for_shape(rows, cols, scale)?
        };
        let report = shrink_denoise(&m, &params, margin)?;
        let est = &report.estimate;
        for i in 0..rows {
            for j in 0..cols {
                out.add(i * cols + j).write(est[(i, j)]);
            }
        }
        if !n_detected.is_null() {
            n_detected.write(report.detected.len());
        }
        Ok(())
    })
}

// Transfer

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GendynTransfer {
    pub eps_a_alone: f64,
    pub eps_a_joint: f64,
    /// Positive when training on task B alongside improves task A.
    pub benefit: f64,
}

/// Theory transfer benefit for two rank-1 tasks with input overlap `q`, unit
/// noise and a full-width student.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gendyn_transfer_rank1(
    n1: usize,
    n3: usize,
    snr_a: f64,
    snr_b: f64,
    q: f64,
    eps: f64,
    depth: u32,
    seed: u64,
    out: *mut GendynTransfer,
) -> GendynStatus {
    guard(|| {
        let pair = rank1_pair(n1, n3, snr_a, snr_b, q, 1.0, seed)?;
        let r = transfer_benefit_theory(&pair, &dims(depth, eps, 1.0)?, n3)?;
        write(
            out,
            "out",
            GendynTransfer {
                eps_a_alone: r.eps_a_alone,
                eps_a_joint: r.eps_a_joint,
                benefit: r.benefit,
            },
        )
    })
}
