//! Fundamental and bound two-soliton waveforms, their breathing period, and
//! tools to observe the breathing (spectral evolution, in-band energy,
//! recurrence period).
//!
//! Soliton units: `tau = t / T0`, `u = conj(q) / sqrt(P_norm)` with
//! `P_norm = |beta2| / (gamma T0^2)`. In these units the fiber model becomes
//! the focusing equation `j u_zeta + u_tautau / 2 + |u|^2 u = 0` with
//! `zeta = z / L_D`, `L_D = T0^2 / |beta2|`.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::fiber::{self, FiberSpec, SsfmConfig};
use crate::rng;
use crate::scattering::ScatteringProblem;
use crate::signal::{BasebandSignal, SamplingGrid};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Phase convention of the norming constants of a bound two-soliton.
///
/// Both choices give unit-magnitude constants and a time-symmetric pulse;
/// they describe the same breathing orbit half a period apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormingPhase {
    /// Equal constants: the two components collide at the origin and the
    /// launch state is the peaked, spectrally broad one.
    #[default]
    Colliding,
    /// Alternating signs: the launch state is the broad, spectrally narrow
    /// one (for `eta = {0.5, 1.5}` exactly `2 sech`).
    Alternating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonSpec {
    pub t0_ps: f64,
    /// Imaginary parts of the discrete eigenvalues, strictly increasing.
    pub etas: Vec<f64>,
    pub norming: NormingPhase,
}

impl SolitonSpec {
    pub fn new(t0_ps: f64, etas: Vec<f64>) -> Result<Self> {
        let s = Self {
            t0_ps,
            etas,
            norming: NormingPhase::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_norming(mut self, n: NormingPhase) -> Self {
        self.norming = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0_ps > 0.0) {
            return Err(Error::invalid("T0 must be positive"));
        }
        if self.etas.is_empty() || self.etas.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::invalid("eigenvalue magnitudes must be positive"));
        }
        if self.etas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("eigenvalue magnitudes must be strictly increasing"));
        }
        Ok(())
    }

    pub fn t0(&self) -> f64 {
        self.t0_ps * 1e-12
    }
}

/// Peak power of the unit-amplitude fundamental soliton, in W.
pub fn soliton_power(fiber: &FiberSpec, t0_ps: f64) -> Result<f64> {
    if !(fiber.gamma > 0.0) {
        return Err(Error::invalid("soliton scale needs a positive Kerr coefficient"));
    }
    let t0 = t0_ps * 1e-12;
    Ok(fiber.beta2().abs() / (fiber.gamma * t0 * t0))
}

/// Dispersion length in km.
pub fn dispersion_length(fiber: &FiberSpec, t0_ps: f64) -> Result<f64> {
    if fiber.beta2_ps2_per_km == 0.0 {
        return Err(Error::invalid("dispersion length needs nonzero beta2"));
    }
    Ok(t0_ps * t0_ps / fiber.beta2_ps2_per_km.abs())
}

/// Breathing period of a bound two-soliton in km.
pub fn soliton_period(spec: &SolitonSpec, fiber: &FiberSpec) -> Result<f64> {
    if spec.etas.len() != 2 {
        return Err(Error::invalid("breathing period needs exactly two eigenvalues"));
    }
    let (e1, e2) = (spec.etas[0], spec.etas[1]);
    if e1 == e2 {
        return Err(Error::invalid("degenerate eigenvalues have no breathing period"));
    }
    Ok(std::f64::consts::PI * dispersion_length(fiber, spec.t0_ps)? / (e2 * e2 - e1 * e1).abs())
}

fn time_axis(grid: &SamplingGrid) -> impl Iterator<Item = f64> + '_ {
    let dt = grid.dt();
    (0..grid.n_samples()).map(move |k| k as f64 * dt)
}

/// `A sqrt(P_norm) sech((t - center) / T0)` on the grid (`t_k = k dt`).
pub fn sech_soliton(
    amplitude: f64,
    t0_ps: f64,
    fiber: &FiberSpec,
    grid: SamplingGrid,
    center_ps: f64,
) -> Result<BasebandSignal> {
    if !(amplitude > 0.0) || !(t0_ps > 0.0) {
        return Err(Error::invalid("amplitude and T0 must be positive"));
    }
    let a = amplitude * soliton_power(fiber, t0_ps)?.sqrt();
    let t0 = t0_ps * 1e-12;
    let c = center_ps * 1e-12;
    let s = time_axis(&grid)
        .map(|t| Complex64::new(a / ((t - c) / t0).cosh(), 0.0))
        .collect();
    BasebandSignal::new(s, grid)
}

/// Normalized bound two-soliton `u(tau)` built by two Darboux steps from the
/// zero potential. `etas` must hold two distinct positive values.
pub fn two_soliton_profile(etas: [f64; 2], norming: NormingPhase, tau: &[f64]) -> Vec<Complex64> {
    let l1 = Complex64::new(0.0, etas[0]);
    let l2 = Complex64::new(0.0, etas[1]);
    let c2 = match norming {
        NormingPhase::Colliding => 1.0,
        NormingPhase::Alternating => -1.0,
    };
    tau.iter()
        .map(|&t| {
            let (a, b) = seed_eigenvector(l1, 1.0, t);
            let det = a.norm_sqr() + b.norm_sqr();
            let u1 = -2.0 * J * (l1 - l1.conj()) * a * b.conj() / det;
            // S = H diag(l, conj l) H^-1 with H = [[a, -b*], [b, a*]]
            let s11 = (l1 * a * a.conj() + l1.conj() * b.conj() * b) / det;
            let s12 = (l1 * a * b.conj() - l1.conj() * b.conj() * a) / det;
            let s21 = (l1 * b * a.conj() - l1.conj() * a.conj() * b) / det;
            let s22 = (l1 * b * b.conj() + l1.conj() * a.conj() * a) / det;
            let (p, q) = seed_eigenvector(l2, c2, t);
            let ya = (l2 - s11) * p - s12 * q;
            let yb = -s21 * p + (l2 - s22) * q;
            let d2 = ya.norm_sqr() + yb.norm_sqr();
            u1 - 2.0 * J * (l2 - l2.conj()) * ya * yb.conj() / d2
        })
        .collect()
}

/// `(exp(-j l tau), c exp(j l tau))` rescaled by its larger entry; the
/// Darboux update is invariant under such rescaling.
fn seed_eigenvector(lambda: Complex64, c: f64, tau: f64) -> (Complex64, Complex64) {
    let a = (-J * lambda * tau).exp();
    let b = c * (J * lambda * tau).exp();
    // for imaginary lambda both entries are real exponentials
    let s = a.norm().max(b.norm());
    if s.is_finite() {
        (a / s, b / s)
    } else if tau * lambda.im > 0.0 {
        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    } else {
        (Complex64::new(0.0, 0.0), Complex64::new(c.signum(), 0.0))
    }
}

/// Bound two-soliton in physical units centred at the middle of the frame.
pub fn two_soliton_from_eigenvalues(
    spec: &SolitonSpec,
    fiber: &FiberSpec,
    grid: SamplingGrid,
) -> Result<BasebandSignal> {
    let center = grid.n_samples() as f64 * grid.dt() / 2.0;
    two_soliton_at(spec, fiber, grid, center * 1e12)
}

/// Bound two-soliton centred at `center_ps` on the grid's time axis.
pub fn two_soliton_at(
    spec: &SolitonSpec,
    fiber: &FiberSpec,
    grid: SamplingGrid,
    center_ps: f64,
) -> Result<BasebandSignal> {
    spec.validate()?;
    if spec.etas.len() != 2 {
        return Err(Error::invalid("two-soliton needs exactly two eigenvalues"));
    }
    let amp = soliton_power(fiber, spec.t0_ps)?.sqrt();
    let t0 = spec.t0();
    let c = center_ps * 1e-12;
    let tau: Vec<f64> = time_axis(&grid).map(|t| (t - c) / t0).collect();
    let u = two_soliton_profile([spec.etas[0], spec.etas[1]], spec.norming, &tau);
    BasebandSignal::new(u.into_iter().map(|v| v.conj() * amp).collect(), grid)
}

/// Discrete eigenvalues (upper half plane, sorted by imaginary part) of a
/// physical signal normalized with soliton scale `t0_ps`.
pub fn zs_eigenvalues(x: &BasebandSignal, t0_ps: f64, fiber: &FiberSpec) -> Result<Vec<Complex64>> {
    let amp = soliton_power(fiber, t0_ps)?.sqrt();
    let dtau = x.grid().dt() / (t0_ps * 1e-12);
    let u: Vec<Complex64> = x.samples().iter().map(|v| v.conj() / amp).collect();
    let problem = ScatteringProblem::new(&u, dtau)?;
    Ok(problem.eigenvalues(1e-3))
}

/// Spectral intensity `|Q(f, z)|^2` at equally spaced distances.
#[derive(Debug, Clone)]
pub struct SpectralEvolution {
    pub z_km: Vec<f64>,
    /// Bin frequencies in ascending order.
    pub f_hz: Vec<f64>,
    /// Raw intensities, one row per distance, columns matching `f_hz`.
    pub intensity: Vec<Vec<f64>>,
}

impl SpectralEvolution {
    /// Rows scaled to unit peak.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.intensity
            .iter()
            .map(|row| {
                let m = row.iter().cloned().fold(0.0, f64::max);
                row.iter().map(|v| if m > 0.0 { v / m } else { 0.0 }).collect()
            })
            .collect()
    }

    /// Share of each row's energy within `-B/2 <= f < B/2`.
    pub fn in_band_fraction(&self, bandwidth_hz: f64) -> Vec<f64> {
        self.intensity
            .iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                let inside: f64 = row
                    .iter()
                    .zip(&self.f_hz)
                    .filter(|(_, f)| in_band(**f, bandwidth_hz))
                    .map(|(v, _)| v)
                    .sum();
                if total > 0.0 {
                    inside / total
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Relative distance of each row's intensity pattern from the first row.
    pub fn recurrence_distance(&self) -> Vec<f64> {
        let first = &self.intensity[0];
        let norm = first.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.intensity
            .iter()
            .map(|row| {
                row.iter()
                    .zip(first)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    / norm
            })
            .collect()
    }

    /// Distance of the first recurrence of the launch pattern, refined by a
    /// parabola through the sampled minimum.
    pub fn recurrence_period(&self) -> Result<f64> {
        let d = self.recurrence_distance();
        let mut running_max = 0.0f64;
        for i in 1..d.len().saturating_sub(1) {
            running_max = running_max.max(d[i]);
            let local_min = d[i] <= d[i - 1] && d[i] <= d[i + 1];
            if local_min && d[i] < 0.25 * running_max {
                let (a, b, c) = (d[i - 1], d[i], d[i + 1]);
                let denom = a - 2.0 * b + c;
                let shift = if denom > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
                let dz = self.z_km[1] - self.z_km[0];
                return Ok(self.z_km[i] + shift * dz);
            }
        }
        Err(Error::InsufficientData(
            "no recurrence of the launch spectrum within the propagated range".into(),
        ))
    }

    /// CSV grid `z_km,f_hz,intensity` with rows normalized to unit peak.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "z_km,f_hz,intensity")?;
        for (z, row) in self.z_km.iter().zip(self.normalized()) {
            for (f, v) in self.f_hz.iter().zip(row) {
                writeln!(w, "{z},{f:e},{v:e}")?;
            }
        }
        Ok(())
    }
}

pub(crate) fn in_band(f: f64, bandwidth: f64) -> bool {
    let eps = 1e-9 * bandwidth.abs().max(1.0);
    f >= -bandwidth / 2.0 - eps && f < bandwidth / 2.0 - eps
}

/// Propagates `x` noiselessly and records its spectrum at `n_snapshots`
/// distances from 0 to `length_km`.
pub fn spectral_evolution(
    x: &BasebandSignal,
    fiber: &FiberSpec,
    length_km: f64,
    cfg: &SsfmConfig,
    n_snapshots: usize,
) -> Result<SpectralEvolution> {
    if n_snapshots < 2 {
        return Err(Error::invalid("spectral evolution needs at least two snapshots"));
    }
    let segment = length_km / (n_snapshots - 1) as f64;
    let quiet = SsfmConfig {
        noise_enabled: false,
        ..*cfg
    };
    quiet.n_steps(segment)?;
    let n = x.len();
    let freqs = fft::frequencies(n, x.grid().sample_rate());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| freqs[*a].total_cmp(&freqs[*b]));
    let row = |s: &BasebandSignal| -> Vec<f64> {
        let spec = s.spectrum();
        order.iter().map(|&k| spec[k].norm_sqr()).collect()
    };
    let mut rng = rng::seeded(0);
    let mut cur = x.clone();
    let mut z_km = vec![0.0];
    let mut intensity = vec![row(&cur)];
    for i in 1..n_snapshots {
        cur = fiber::ssfm_propagate(&cur, fiber, segment, &quiet, &mut rng)?;
        z_km.push(i as f64 * segment);
        intensity.push(row(&cur));
    }
    Ok(SpectralEvolution {
        z_km,
        f_hz: order.iter().map(|&k| freqs[k]).collect(),
        intensity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fiber() -> FiberSpec {
        FiberSpec::standard().noiseless()
    }

    #[test]
    fn scales() {
        let p = soliton_power(&fiber(), 50.0).unwrap();
        assert!((p - 6.825e-3).abs() < 1e-5, "{p}");
        let ld = dispersion_length(&fiber(), 50.0).unwrap();
        assert!((ld - 115.367).abs() < 1e-2, "{ld}");
        assert!(soliton_power(&fiber().linear_only(), 50.0).is_err());
    }

    #[test]
    fn period_formula() {
        let s = SolitonSpec::new(50.0, vec![0.5, 1.0]).unwrap();
        let zp = soliton_period(&s, &fiber()).unwrap();
        assert!((zp - 483.25).abs() < 0.1, "{zp}");
        let s2 = SolitonSpec::new(50.0, vec![0.5, 1.5]).unwrap();
        let ld = dispersion_length(&fiber(), 50.0).unwrap();
        assert!((soliton_period(&s2, &fiber()).unwrap() - std::f64::consts::FRAC_PI_2 * ld).abs() < 1e-9);
        let s3 = SolitonSpec::new(100.0, vec![0.5, 1.0]).unwrap();
        assert!((soliton_period(&s3, &fiber()).unwrap() - 4.0 * zp).abs() < 1e-9);
        assert!(SolitonSpec::new(50.0, vec![1.0, 1.0]).is_err());
        assert!(soliton_period(&SolitonSpec::new(50.0, vec![1.0]).unwrap(), &fiber()).is_err());
    }

    #[test]
    fn alternating_norming_gives_double_sech() {
        let tau: Vec<f64> = (-200..200).map(|k| k as f64 * 0.05).collect();
        let u = two_soliton_profile([0.5, 1.5], NormingPhase::Alternating, &tau);
        let max_dev = u
            .iter()
            .zip(&tau)
            .map(|(v, t)| (v.norm() - 2.0 / t.cosh()).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 1e-12, "{max_dev}");
        let peak = two_soliton_profile([0.5, 1.0], NormingPhase::Colliding, &[0.0])[0].norm();
        assert!((peak - 3.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_energy_trace_formula() {
        let dt = 0.01;
        let tau: Vec<f64> = (-4000..4000).map(|k| k as f64 * dt).collect();
        for norming in [NormingPhase::Colliding, NormingPhase::Alternating] {
            let u = two_soliton_profile([0.5, 1.0], norming, &tau);
            let e: f64 = u.iter().map(|v| v.norm_sqr()).sum::<f64>() * dt;
            assert!((e - 6.0).abs() < 1e-6, "{e}");
        }
    }

    #[test]
    fn far_tails_do_not_overflow() {
        let u = two_soliton_profile([0.5, 1.0], NormingPhase::Colliding, &[-2000.0, 2000.0]);
        assert!(u.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    }

    #[test]
    fn in_band_is_half_open() {
        assert!(in_band(-5.0, 10.0));
        assert!(!in_band(5.0, 10.0));
    }
}
