//! C ABI over the simulator.
//!
//! Objects cross the boundary as opaque handles created by `*_new` style
//! functions and released by the matching `*_free`. Every fallible function
//! returns a [`ZdivStatus`]; on failure a description is kept per thread and
//! can be read with [`zdiv_last_error`]. Panics are caught at the boundary
//! and reported as [`ZdivStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use zdiv::experiments::{self, ExperimentConfig, Preset, Scenario};
use zdiv::fiber::{self, FiberSpec, SsfmConfig};
use zdiv::signal::{BasebandSignal, SamplingGrid};
use zdiv::{equalizer, metrics, rng, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZdivStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    InsufficientData = 5,
    Config = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

impl From<&Error> for ZdivStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => ZdivStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => ZdivStatus::DimensionMismatch,
            Error::Numerical(_) => ZdivStatus::Numerical,
            Error::InsufficientData(_) => ZdivStatus::InsufficientData,
            Error::Config(_) => ZdivStatus::Config,
            Error::Io(_) | Error::Json(_) => ZdivStatus::Io,
        }
    }
}

/// Fiber parameters passed by value.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZdivFiber {
    /// Group-velocity dispersion in ps^2/km.
    pub beta2_ps2_per_km: f64,
    /// Nonlinearity in 1/(W km).
    pub gamma: f64,
    /// Loss in dB/km, compensated by distributed gain.
    pub alpha_db_per_km: f64,
    pub f0_hz: f64,
    /// Spontaneous-emission factor of the distributed gain.
    pub nsp: f64,
}

impl From<ZdivFiber> for FiberSpec {
    fn from(f: ZdivFiber) -> Self {
        FiberSpec {
            beta2_ps2_per_km: f.beta2_ps2_per_km,
            gamma: f.gamma,
            alpha_db_per_km: f.alpha_db_per_km,
            f0_hz: f.f0_hz,
            nsp_raman: f.nsp,
        }
    }
}

/// Opaque sampled complex envelope.
pub struct ZdivSignal(BasebandSignal);

/// Opaque experiment configuration.
pub struct ZdivConfig(ExperimentConfig);

/// Opaque scenario result holding its CSV table.
pub struct ZdivResult {
    csv: CString,
    rows: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (ZdivStatus, String)>) -> ZdivStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ZdivStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            ZdivStatus::Panic
        }
    }
}

fn lift(e: Error) -> (ZdivStatus, String) {
    (ZdivStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (ZdivStatus, String) {
    (ZdivStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ZdivStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (ZdivStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (ZdivStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn zdiv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn zdiv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Standard single-mode fiber parameters.
#[no_mangle]
pub extern "C" fn zdiv_fiber_standard() -> ZdivFiber {
    let f = FiberSpec::standard();
    ZdivFiber {
        beta2_ps2_per_km: f.beta2_ps2_per_km,
        gamma: f.gamma,
        alpha_db_per_km: f.alpha_db_per_km,
        f0_hz: f.f0_hz,
        nsp: f.nsp_raman,
    }
}

/// Distributed-amplification noise variance in W over `dz_km` within
/// `bandwidth_hz`.
#[no_mangle]
pub extern "C" fn zdiv_ase_sigma2(fiber: ZdivFiber, dz_km: f64, bandwidth_hz: f64) -> f64 {
    fiber::ase_sigma2(&fiber.into(), dz_km, bandwidth_hz)
}

/// Creates a signal from `n` interleaved `re, im` pairs.
///
/// # Safety
/// `interleaved` must point to `2 * n` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn zdiv_signal_new(
    interleaved: *const f64,
    n: usize,
    sample_rate_hz: f64,
    out: *mut *mut ZdivSignal,
) -> ZdivStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if interleaved.is_null() {
            return Err(null("interleaved"));
        }
        let raw = std::slice::from_raw_parts(interleaved, 2 * n);
        let samples = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let grid = SamplingGrid::raw(sample_rate_hz, n).map_err(lift)?;
        let s = BasebandSignal::new(samples, grid).map_err(lift)?;
        *out = Box::into_raw(Box::new(ZdivSignal(s)));
        Ok(())
    })
}

/// Releases a signal; null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zdiv_signal_free(s: *mut ZdivSignal) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of samples, or 0 for null.
///
/// # Safety
/// `s` must be null or a live signal handle.
#[no_mangle]
pub unsafe extern "C" fn zdiv_signal_len(s: *const ZdivSignal) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the samples as interleaved `re, im` pairs into `buf`, which holds
/// `capacity` doubles.
///
/// # Safety
/// `s` must be a live handle and `buf` must hold `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn zdiv_signal_read(s: *const ZdivSignal, buf: *mut f64, capacity: usize) -> ZdivStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("signal"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let need = 2 * s.0.len();
        if capacity < need {
            return Err((
                ZdivStatus::BufferTooSmall,
                format!("buffer holds {capacity} doubles, need {need}"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (d, v) in dst.chunks_exact_mut(2).zip(s.0.samples()) {
            d[0] = v.re;
            d[1] = v.im;
        }
        Ok(())
    })
}

/// Split-step propagation over `length_km` with step `step_km`. Noise is
/// drawn from `seed` when `noise` is nonzero.
///
/// # Safety
/// `input` must be a live handle and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn zdiv_ssfm_propagate(
    input: *const ZdivSignal,
    fiber: ZdivFiber,
    length_km: f64,
    step_km: f64,
    noise: i32,
    seed: u64,
    out: *mut *mut ZdivSignal,
) -> ZdivStatus {
    guard(|| {
        let x = input.as_ref().ok_or_else(|| null("input"))?;
        let out = out_ptr(out, "out")?;
        let cfg = SsfmConfig::new(step_km, noise != 0);
        let mut r = rng::seeded(seed);
        let y = fiber::ssfm_propagate(&x.0, &fiber.into(), length_km, &cfg, &mut r).map_err(lift)?;
        *out = Box::into_raw(Box::new(ZdivSignal(y)));
        Ok(())
    })
}

/// Ideal dispersion compensation over `length_km`.
///
/// # Safety
/// `input` must be a live handle and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn zdiv_cdc(
    input: *const ZdivSignal,
    beta2_ps2_per_km: f64,
    length_km: f64,
    out: *mut *mut ZdivSignal,
) -> ZdivStatus {
    guard(|| {
        let x = input.as_ref().ok_or_else(|| null("input"))?;
        let out = out_ptr(out, "out")?;
        let y = equalizer::cdc(&x.0, beta2_ps2_per_km, length_km);
        *out = Box::into_raw(Box::new(ZdivSignal(y)));
        Ok(())
    })
}

/// Information rate in bit/symbol of `n` labelled complex observations
/// (interleaved `re, im`) under a Gaussian demapper fit to the same data.
///
/// # Safety
/// `labels` must hold `n` values, `interleaved` `2 * n` doubles, and
/// `mi_bits` must be writable.
#[no_mangle]
pub unsafe extern "C" fn zdiv_mutual_information(
    labels: *const u32,
    interleaved: *const f64,
    n: usize,
    order: u32,
    mi_bits: *mut f64,
) -> ZdivStatus {
    guard(|| {
        let out = out_ptr(mi_bits, "mi_bits")?;
        if labels.is_null() || interleaved.is_null() {
            return Err(null("labels or observations"));
        }
        let l: Vec<usize> = std::slice::from_raw_parts(labels, n).iter().map(|&v| v as usize).collect();
        let ys: Vec<Complex64> = std::slice::from_raw_parts(interleaved, 2 * n)
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        let g = metrics::fit_gmm(&l, &ys, order as usize).map_err(lift)?;
        *out = metrics::mutual_information(&g, &l, &ys).map_err(lift)?;
        Ok(())
    })
}

/// Creates a configuration from a preset name (`desk` or `paper`).
///
/// # Safety
/// `preset` must be a NUL-terminated string and `out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn zdiv_config_new(preset: *const c_char, out: *mut *mut ZdivConfig) -> ZdivStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let p: Preset = str_arg(preset, "preset")?.parse().map_err(lift)?;
        let c = ExperimentConfig::preset(p).map_err(lift)?;
        *out = Box::into_raw(Box::new(ZdivConfig(c)));
        Ok(())
    })
}

/// Applies config text (`key = value` lines) on top of the configuration.
///
/// # Safety
/// `cfg` must be a live handle and `text` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn zdiv_config_apply(cfg: *mut ZdivConfig, text: *const c_char) -> ZdivStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("config"))?;
        c.0.apply_text(str_arg(text, "text")?).map_err(lift)
    })
}

/// Sets a single key.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn zdiv_config_set(cfg: *mut ZdivConfig, key: *const c_char, value: *const c_char) -> ZdivStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("config"))?;
        c.0.set(str_arg(key, "key")?, str_arg(value, "value")?).map_err(lift)
    })
}

/// Writes the configuration digest (NUL-terminated) into `buf`.
///
/// # Safety
/// `cfg` must be a live handle and `buf` must hold `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn zdiv_config_hash(cfg: *const ZdivConfig, buf: *mut c_char, capacity: usize) -> ZdivStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("config"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let h = c.0.hash();
        if capacity < h.len() + 1 {
            return Err((
                ZdivStatus::BufferTooSmall,
                format!("buffer holds {capacity} bytes, need {}", h.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(h.as_ptr().cast::<c_char>(), buf, h.len());
        *buf.add(h.len()) = 0;
        Ok(())
    })
}

/// Releases a configuration; null is ignored.
///
/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zdiv_config_free(cfg: *mut ZdivConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs a scenario (`soliton-l2-sweep`, `ae-l2-sweep`, `ae-power-sweep`,
/// `baseline-curves`, `train`) and returns its CSV table. Nothing is
/// written to disk except the checkpoint of `train`.
///
/// # Safety
/// `cfg` must be a live handle, `scenario` NUL-terminated and `out` a
/// writable slot.
#[no_mangle]
pub unsafe extern "C" fn zdiv_run_scenario(
    cfg: *const ZdivConfig,
    scenario: *const c_char,
    out: *mut *mut ZdivResult,
) -> ZdivStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("config"))?;
        let out = out_ptr(out, "out")?;
        let s: Scenario = str_arg(scenario, "scenario")?.parse().map_err(lift)?;
        let r = experiments::run_scenario(s, &c.0).map_err(lift)?;
        let csv = CString::new(r.csv(&c.0)).map_err(|e| (ZdivStatus::Io, e.to_string()))?;
        *out = Box::into_raw(Box::new(ZdivResult { csv, rows: r.rows.len() }));
        Ok(())
    })
}

/// CSV text of a result; valid while the result lives.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn zdiv_result_csv(r: *const ZdivResult) -> *const c_char {
    r.as_ref().map_or(ptr::null(), |r| r.csv.as_ptr())
}

/// Number of data rows in a result, or 0 for null.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn zdiv_result_rows(r: *const ZdivResult) -> usize {
    r.as_ref().map_or(0, |r| r.rows)
}

/// Releases a result; null is ignored.
///
/// # Safety
/// `r` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn zdiv_result_free(r: *mut ZdivResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
