//! Single-mode fiber channel: symmetric split-step Fourier solver with
//! distributed ASE, plus the coupler and lumped amplifier of the diversity
//! link.
//!
//! The propagation model is
//! `dq/dz = j (beta2/2) d2q/dt2 - j gamma |q|^2 q + n(t, z)`,
//! lossless (ideal distributed Raman amplification) with attenuation entering
//! only through the noise level. With anomalous dispersion (`beta2 < 0`) this
//! form supports bright solitons.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::rng::{self, SimRng};
use crate::signal::BasebandSignal;

pub const PLANCK: f64 = 6.626_070_15e-34;

/// Physical constants of a fiber span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    /// Group-velocity dispersion in ps^2/km.
    pub beta2_ps2_per_km: f64,
    /// Kerr coefficient in 1/(W km).
    pub gamma: f64,
    /// Attenuation in dB/km; only sets the distributed noise level.
    pub alpha_db_per_km: f64,
    /// Carrier frequency in Hz.
    pub f0_hz: f64,
    /// Spontaneous emission factor of the distributed amplification; 0
    /// disables fiber noise.
    pub nsp_raman: f64,
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self::standard()
    }
}

impl FiberSpec {
    /// Standard single-mode fiber at 1550 nm with ideal Raman amplification.
    pub fn standard() -> Self {
        Self {
            beta2_ps2_per_km: -21.67,
            gamma: 1.27,
            alpha_db_per_km: 0.2,
            f0_hz: 193.55e12,
            nsp_raman: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.beta2_ps2_per_km.is_finite()
            && self.gamma.is_finite()
            && self.gamma >= 0.0
            && self.alpha_db_per_km >= 0.0
            && self.f0_hz > 0.0
            && (self.nsp_raman == 0.0 || self.nsp_raman >= 1.0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid fiber parameters: {self:?}")))
        }
    }

    /// beta2 in s^2/km.
    pub fn beta2(&self) -> f64 {
        self.beta2_ps2_per_km * 1e-24
    }

    /// Linear power attenuation coefficient in 1/km.
    pub fn alpha_linear(&self) -> f64 {
        self.alpha_db_per_km * std::f64::consts::LN_10 / 10.0
    }

    /// Copy with negated dispersion and nonlinearity, which runs the
    /// propagation backwards.
    pub fn reversed(&self) -> Self {
        Self {
            beta2_ps2_per_km: -self.beta2_ps2_per_km,
            gamma: -self.gamma,
            nsp_raman: 0.0,
            ..*self
        }
    }

    pub fn linear_only(&self) -> Self {
        Self { gamma: 0.0, ..*self }
    }

    pub fn noiseless(&self) -> Self {
        Self {
            nsp_raman: 0.0,
            ..*self
        }
    }
}

/// Called after every step with the step index and the field.
type StepHook<'a> = &'a mut dyn FnMut(usize, &[Complex64]) -> Result<()>;

/// Split-step settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsfmConfig {
    pub step_km: f64,
    pub noise_enabled: bool,
    /// Bandwidth plugged into the ASE formula. `None` uses the simulation
    /// bandwidth, so the noise is white over the whole grid and any later
    /// band limit captures its proportional share.
    pub noise_bandwidth_hz: Option<f64>,
}

impl Default for SsfmConfig {
    fn default() -> Self {
        Self {
            step_km: 0.1,
            noise_enabled: true,
            noise_bandwidth_hz: None,
        }
    }
}

impl SsfmConfig {
    pub fn new(step_km: f64, noise_enabled: bool) -> Self {
        Self {
            step_km,
            noise_enabled,
            noise_bandwidth_hz: None,
        }
    }

    /// Number of steps covering `length_km`; errors if it is not an integer
    /// multiple of the step.
    pub fn n_steps(&self, length_km: f64) -> Result<usize> {
        if !(self.step_km > 0.0) || !self.step_km.is_finite() {
            return Err(Error::invalid("step size must be positive"));
        }
        if !(length_km >= 0.0) || !length_km.is_finite() {
            return Err(Error::invalid("fiber length must be non-negative"));
        }
        let n = (length_km / self.step_km).round();
        if (n * self.step_km - length_km).abs() > 1e-9 * length_km.max(1.0) {
            return Err(Error::invalid(format!(
                "length {length_km} km is not a multiple of the {} km step",
                self.step_km
            )));
        }
        Ok(n as usize)
    }
}

/// Lumped amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdfaSpec {
    pub gain_db: f64,
    pub nsp: f64,
}

impl Default for EdfaSpec {
    fn default() -> Self {
        Self {
            gain_db: 10.0 * 2f64.log10(),
            nsp: 3.16,
        }
    }
}

impl EdfaSpec {
    pub fn gain_linear(&self) -> f64 {
        10f64.powf(self.gain_db / 10.0)
    }
}

/// ASE variance in W added over a step of `dz_km` within bandwidth `b_hz`.
pub fn ase_sigma2(fiber: &FiberSpec, dz_km: f64, b_hz: f64) -> f64 {
    fiber.nsp_raman * PLANCK * fiber.f0_hz * fiber.alpha_linear() * dz_km * b_hz
}

/// `exp(-j (beta2/2) w^2 L)` on the DFT bins of an `n`-sample grid, with
/// `beta2` in s^2/km. Negative `length_km` gives the inverse response.
pub fn dispersion_response(
    n: usize,
    sample_rate: f64,
    beta2_s2_per_km: f64,
    length_km: f64,
) -> Vec<Complex64> {
    fft::angular_frequencies(n, sample_rate)
        .into_iter()
        .map(|w| Complex64::from_polar(1.0, -0.5 * beta2_s2_per_km * w * w * length_km))
        .collect()
}

#[inline]
pub(crate) fn kerr_rotate(buf: &mut [Complex64], gamma_dz: f64) {
    if gamma_dz == 0.0 {
        return;
    }
    for v in buf.iter_mut() {
        *v *= Complex64::from_polar(1.0, -gamma_dz * v.norm_sqr());
    }
}

/// Adjoint of [`kerr_rotate`] at input `q`, applied to the output gradient
/// `g` in place. The map is not complex-linear, hence the conjugate term.
pub(crate) fn kerr_adjoint(q: &[Complex64], g: &mut [Complex64], c: f64) {
    if c == 0.0 {
        return;
    }
    let j = Complex64::new(0.0, 1.0);
    for (gy, &qv) in g.iter_mut().zip(q) {
        let p = qv.norm_sqr();
        let e = Complex64::from_polar(1.0, c * p);
        let t1 = gy.conj() * (-j * c * qv * qv * e.conj());
        let t2 = *gy * e * (1.0 + j * c * p);
        *gy = t1 + t2;
    }
}

/// Symmetric split step on a fixed grid: half linear step, Kerr rotation,
/// half linear step, then additive noise.
///
/// The field stays in the frequency domain between Kerr rotations, so a
/// step costs one forward and one inverse transform. Noise is drawn as
/// white spectral samples, which is the same process as white time-domain
/// noise of the stated per-sample variance.
#[derive(Debug, Clone)]
pub struct SplitStep {
    half: Arc<[Complex64]>,
    gamma_dz: f64,
    dz_km: f64,
    dispersive: bool,
}

impl SplitStep {
    pub fn new(n: usize, sample_rate: f64, fiber: &FiberSpec, dz_km: f64) -> Self {
        Self {
            half: dispersion_response(n, sample_rate, fiber.beta2(), dz_km / 2.0).into(),
            gamma_dz: fiber.gamma * dz_km,
            dz_km,
            dispersive: fiber.beta2_ps2_per_km != 0.0,
        }
    }

    /// Grid size the step was built for.
    pub fn len(&self) -> usize {
        self.half.len()
    }

    pub fn is_empty(&self) -> bool {
        self.half.is_empty()
    }

    fn spectral_noise(&self, n: usize, noise_var: f64, rng: &mut SimRng) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        rng::add_white_noise(&mut v, noise_var * n as f64, rng);
        v
    }

    /// Runs `steps` steps on the time-domain field `q` in place, adding
    /// white noise of per-sample variance `noise_var` after each. `mid`
    /// sees the field entering each Kerr rotation; `end` (when given) sees
    /// the field at the end of each step.
    pub(crate) fn run(
        &self,
        q: &mut [Complex64],
        steps: usize,
        noise_var: f64,
        rng: &mut SimRng,
        mut mid: impl FnMut(&[Complex64]),
        mut end: Option<StepHook<'_>>,
    ) -> Result<()> {
        let n = q.len();
        if n != self.half.len() {
            return Err(Error::DimensionMismatch {
                context: "propagation grid",
                expected: self.half.len(),
                got: n,
            });
        }
        if steps == 0 {
            return Ok(());
        }
        if !self.dispersive {
            for s in 0..steps {
                check_step(q, s, self.dz_km)?;
                mid(q);
                kerr_rotate(q, self.gamma_dz);
                if noise_var > 0.0 {
                    let mut nz = self.spectral_noise(n, noise_var, rng);
                    fft::inverse(&mut nz);
                    q.iter_mut().zip(&nz).for_each(|(v, w)| *v += w);
                }
                if let Some(f) = end.as_deref_mut() {
                    f(s, q)?;
                }
            }
            return Ok(());
        }
        fft::forward(q);
        let mut tmp = Vec::new();
        for s in 0..steps {
            mul(q, &self.half);
            fft::inverse(q);
            check_step(q, s, self.dz_km)?;
            mid(q);
            kerr_rotate(q, self.gamma_dz);
            fft::forward(q);
            mul(q, &self.half);
            if noise_var > 0.0 {
                let nz = self.spectral_noise(n, noise_var, rng);
                q.iter_mut().zip(&nz).for_each(|(v, w)| *v += w);
            }
            if let Some(f) = end.as_deref_mut() {
                tmp.clear();
                tmp.extend_from_slice(q);
                fft::inverse(&mut tmp);
                f(s, &tmp)?;
            }
        }
        fft::inverse(q);
        Ok(())
    }

    /// Back-propagates the output gradient `g` in place through the steps
    /// whose Kerr inputs were recorded in `mids`. Noise is an additive
    /// constant and drops out.
    pub(crate) fn adjoint(&self, mids: &[Vec<Complex64>], g: &mut [Complex64]) {
        if mids.is_empty() {
            return;
        }
        if !self.dispersive {
            for a in mids.iter().rev() {
                kerr_adjoint(a, g, self.gamma_dz);
            }
            return;
        }
        // unscaled forward and 1/n inverse transforms pair up exactly
        fft::forward(g);
        for a in mids.iter().rev() {
            mul_conj(g, &self.half);
            fft::inverse(g);
            kerr_adjoint(a, g, self.gamma_dz);
            fft::forward(g);
            mul_conj(g, &self.half);
        }
        fft::inverse(g);
    }
}

fn power_and_peak(buf: &[Complex64]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut peak = 0.0f64;
    for v in buf {
        let p = v.norm_sqr();
        sum += p;
        peak = peak.max(p);
    }
    (sum / buf.len().max(1) as f64, peak)
}

/// Propagates `x` over `length_km` of fiber.
pub fn ssfm_propagate(
    x: &BasebandSignal,
    fiber: &FiberSpec,
    length_km: f64,
    cfg: &SsfmConfig,
    rng: &mut SimRng,
) -> Result<BasebandSignal> {
    propagate_inner(x, fiber, length_km, cfg, rng, None)
}

/// As [`ssfm_propagate`], streaming `z_km,power_w,peak_w` after every step.
pub fn ssfm_propagate_traced<W: Write>(
    x: &BasebandSignal,
    fiber: &FiberSpec,
    length_km: f64,
    cfg: &SsfmConfig,
    rng: &mut SimRng,
    trace: &mut W,
) -> Result<BasebandSignal> {
    writeln!(trace, "z_km,power_w,peak_w")?;
    propagate_inner(x, fiber, length_km, cfg, rng, Some(trace))
}

fn propagate_inner(
    x: &BasebandSignal,
    fiber: &FiberSpec,
    length_km: f64,
    cfg: &SsfmConfig,
    rng: &mut SimRng,
    trace: Option<&mut dyn Write>,
) -> Result<BasebandSignal> {
    fiber.validate_for_propagation()?;
    let steps = cfg.n_steps(length_km)?;
    let fs = x.grid().sample_rate();
    let dz = cfg.step_km;
    let kernel = SplitStep::new(x.len(), fs, fiber, dz);
    let noise_var = if cfg.noise_enabled {
        ase_sigma2(fiber, dz, cfg.noise_bandwidth_hz.unwrap_or(fs))
    } else {
        0.0
    };
    let mut q = x.samples().to_vec();
    match trace {
        Some(t) => {
            let mut log = |s: usize, q: &[Complex64]| -> Result<()> {
                let (p, pk) = power_and_peak(q);
                writeln!(t, "{},{:e},{:e}", (s + 1) as f64 * dz, p, pk)?;
                Ok(())
            };
            kernel.run(&mut q, steps, noise_var, rng, |_| {}, Some(&mut log))?;
        }
        None => kernel.run(&mut q, steps, noise_var, rng, |_| {}, None)?,
    }
    let out = BasebandSignal::from_parts(q, *x.grid(), x.z_km + length_km);
    out.ensure_finite("propagation")?;
    Ok(out)
}

impl FiberSpec {
    fn validate_for_propagation(&self) -> Result<()> {
        // negative gamma is allowed here: backpropagation runs the reversed fiber
        let ok = self.beta2_ps2_per_km.is_finite()
            && self.gamma.is_finite()
            && self.f0_hz > 0.0
            && self.nsp_raman >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid fiber parameters: {self:?}")))
        }
    }
}

#[inline]
fn mul(buf: &mut [Complex64], h: &[Complex64]) {
    for (v, hk) in buf.iter_mut().zip(h) {
        *v *= hk;
    }
}

#[inline]
fn mul_conj(buf: &mut [Complex64], h: &[Complex64]) {
    for (v, hk) in buf.iter_mut().zip(h) {
        *v *= hk.conj();
    }
}

fn check_step(q: &[Complex64], step: usize, dz: f64) -> Result<()> {
    if q.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Ok(());
    }
    let finite: Vec<Complex64> = q
        .iter()
        .copied()
        .filter(|v| v.re.is_finite() && v.im.is_finite())
        .collect();
    let (p, pk) = power_and_peak(&finite);
    Err(Error::Numerical(format!(
        "non-finite field at step {} (z = {} km); finite samples: {} of {}, mean power {:e} W, peak {:e} W",
        step + 1,
        (step + 1) as f64 * dz,
        finite.len(),
        q.len(),
        p,
        pk
    )))
}

/// Ideal 3 dB coupler: both ports carry `x / sqrt(2)` with equal phase.
pub fn coupler_split(x: &BasebandSignal) -> (BasebandSignal, BasebandSignal) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let y: Vec<Complex64> = x.samples().iter().map(|v| v * s).collect();
    let a = BasebandSignal::from_parts(y.clone(), *x.grid(), x.z_km);
    let b = BasebandSignal::from_parts(y, *x.grid(), x.z_km);
    (a, b)
}

/// ASE power in W of a lumped amplifier over bandwidth `b_hz`.
pub fn edfa_noise_power(e: &EdfaSpec, f0_hz: f64, b_hz: f64) -> f64 {
    e.nsp * PLANCK * f0_hz * (e.gain_linear() - 1.0) * b_hz
}

/// `sqrt(G) x` plus white ASE whose total power over `b_hz` follows
/// [`edfa_noise_power`].
pub fn edfa_amplify(
    x: &BasebandSignal,
    e: &EdfaSpec,
    f0_hz: f64,
    b_hz: f64,
    rng: &mut SimRng,
) -> Result<BasebandSignal> {
    if !(e.gain_db >= 0.0) {
        return Err(Error::invalid("amplifier gain must be non-negative"));
    }
    let g = e.gain_linear().sqrt();
    let mut y: Vec<Complex64> = x.samples().iter().map(|v| v * g).collect();
    rng::add_white_noise(&mut y, edfa_noise_power(e, f0_hz, b_hz), rng);
    Ok(BasebandSignal::from_parts(y, *x.grid(), x.z_km))
}
