//! Soliton transmission over the diversity link with a band-limited
//! receiver.
//!
//! Every frame is a train of bound two-solitons, one per slot, each carrying
//! a PSK phase. The phase rotation commutes with propagation, so the
//! information survives the nonlinear channel; how much of it the receiver
//! recovers depends on how much of the pulse spectrum falls inside its
//! band. The second observation is taken `l2` km further down the fiber.
//! A least-squares linear combiner maps taps of both observations to a
//! symbol estimate, which the Gaussian demapper scores.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::{self, EdfaSpec, FiberSpec, SsfmConfig};
use crate::link::LinkMode;
use crate::metrics::{self, EvalSettings, MetricsResult, Observations};
use crate::rng::{self, SimRng};
use crate::signal::{self, BasebandSignal, Constellation, SamplingGrid};
use crate::soliton::{self, SolitonSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonLinkConfig {
    pub soliton: SolitonSpec,
    pub fiber: FiberSpec,
    pub sample_rate: f64,
    /// Slot width in units of T0.
    pub slot_t0: f64,
    pub slots_per_frame: usize,
    pub n_frames: usize,
    /// PSK order.
    pub order: usize,
    pub l1_km: f64,
    /// Second-fiber lengths to evaluate.
    pub l2_km: Vec<f64>,
    /// `Sd` or `Sda`.
    pub mode: LinkMode,
    pub edfa: EdfaSpec,
    pub ssfm: SsfmConfig,
    pub adc_bandwidth_hz: f64,
    /// Front-end noise power in W within the ADC band.
    pub adc_noise_w: f64,
    /// Combiner taps per side and path.
    pub taps: usize,
    pub tap_spacing_ps: f64,
    pub seed: u64,
}

impl Default for SolitonLinkConfig {
    fn default() -> Self {
        Self {
            soliton: SolitonSpec {
                t0_ps: 50.0,
                etas: vec![0.5, 1.0],
                norming: Default::default(),
            },
            fiber: FiberSpec::standard(),
            sample_rate: 250e9,
            slot_t0: 16.0,
            slots_per_frame: 32,
            n_frames: 64,
            order: 16,
            l1_km: 1000.0,
            l2_km: (0..=24).map(|k| 20.0 * k as f64).collect(),
            mode: LinkMode::Sda,
            edfa: EdfaSpec::default(),
            ssfm: SsfmConfig::new(0.5, true),
            adc_bandwidth_hz: 5e9,
            adc_noise_w: 1e-3,
            taps: 2,
            tap_spacing_ps: 100.0,
            seed: 1,
        }
    }
}

impl SolitonLinkConfig {
    fn samples_per_slot(&self) -> Result<usize> {
        let s = self.slot_t0 * self.soliton.t0() * self.sample_rate;
        let r = s.round();
        if !(r >= 1.0) || (s - r).abs() > 1e-9 * s {
            return Err(Error::invalid(format!(
                "slot of {} T0 is not an integer number of samples ({s})",
                self.slot_t0
            )));
        }
        Ok(r as usize)
    }

    fn tap_offsets(&self) -> Result<Vec<isize>> {
        let d = self.tap_spacing_ps * 1e-12 * self.sample_rate;
        if (d - d.round()).abs() > 1e-9 * d.max(1.0) {
            return Err(Error::invalid("tap spacing must be a whole number of samples"));
        }
        let d = d.round() as isize;
        let k = self.taps as isize;
        Ok((-k..=k).map(|t| t * d).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.soliton.validate()?;
        if self.soliton.etas.len() != 2 {
            return Err(Error::invalid("the pulse is a two-soliton"));
        }
        self.samples_per_slot()?;
        self.tap_offsets()?;
        if self.slots_per_frame == 0 || self.n_frames < 2 {
            return Err(Error::invalid("need at least one slot and two frames"));
        }
        if self.order == 0 || !self.slots_per_frame.is_multiple_of(self.order) {
            return Err(Error::invalid("slots per frame must be a multiple of the PSK order"));
        }
        if self.mode == LinkMode::Baseline {
            return Err(Error::invalid("the soliton sweep needs a second fiber (sd or sda)"));
        }
        if self.l2_km.is_empty() || self.l2_km.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::invalid("second-fiber lengths must be non-negative"));
        }
        if self.l2_km.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("second-fiber lengths must be strictly increasing"));
        }
        if !(self.adc_noise_w >= 0.0) {
            return Err(Error::invalid("ADC noise power must be non-negative"));
        }
        signal::check_bandwidth(self.adc_bandwidth_hz, self.sample_rate)?;
        self.ssfm.n_steps(self.l1_km)?;
        let mut prev = 0.0;
        for &l in &self.l2_km {
            self.ssfm.n_steps(l - prev)?;
            prev = l;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<SamplingGrid> {
        SamplingGrid::raw(self.sample_rate, self.samples_per_slot()? * self.slots_per_frame)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub l2_km: f64,
    pub metrics: MetricsResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonSweep {
    pub points: Vec<SweepPoint>,
}

impl SolitonSweep {
    /// Point with the largest information rate (first one on ties).
    pub fn argmax(&self) -> Option<&SweepPoint> {
        self.points
            .iter()
            .fold(None, |best: Option<&SweepPoint>, p| match best {
                Some(b) if b.metrics.mi_bits >= p.metrics.mi_bits => Some(b),
                _ => Some(p),
            })
    }
}

/// Pulse train with the given PSK symbols, one pulse per slot centre.
pub fn soliton_frame(cfg: &SolitonLinkConfig, symbols: &[Complex64]) -> Result<BasebandSignal> {
    let sps = cfg.samples_per_slot()?;
    let grid = SamplingGrid::raw(cfg.sample_rate, sps * symbols.len())?;
    let base = soliton::two_soliton_from_eigenvalues(&cfg.soliton, &cfg.fiber, grid)?;
    let n = grid.n_samples();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (k, s) in symbols.iter().enumerate() {
        // base is centred on sample n/2; move it to k*sps + sps/2
        let shift = (k * sps + sps / 2 + n - n / 2) % n;
        for (i, v) in base.samples().iter().enumerate() {
            out[(i + shift) % n] += s * v;
        }
    }
    BasebandSignal::new(out, grid)
}

/// Complex taps around every slot centre.
fn slot_taps(y: &BasebandSignal, sps: usize, offsets: &[isize]) -> Vec<Vec<Complex64>> {
    let n = y.len() as isize;
    let s = y.samples();
    (0..y.len() / sps)
        .map(|k| {
            let c = (k * sps + sps / 2) as isize;
            offsets.iter().map(|o| s[((c + o) % n + n) as usize % n as usize]).collect()
        })
        .collect()
}

struct FrameTaps {
    indices: Vec<usize>,
    symbols: Vec<Complex64>,
    first: Vec<Vec<Complex64>>,
    /// One entry per second-fiber length.
    second: Vec<Vec<Vec<Complex64>>>,
}

fn run_frame(cfg: &SolitonLinkConfig, psk: &Constellation, frame_seed: u64) -> Result<FrameTaps> {
    let sps = cfg.samples_per_slot()?;
    let offsets = cfg.tap_offsets()?;
    let mut idx_rng = rng::seeded(rng::derive_seed(frame_seed, 0));
    let indices = rng::balanced_indices(&mut idx_rng, cfg.order, cfg.slots_per_frame);
    let symbols = signal::map_symbols(&indices, psk)?.symbols;
    let x = soliton_frame(cfg, &symbols)?;
    let mut noise = rng::seeded(rng::derive_seed(frame_seed, 1));

    let fs = cfg.sample_rate;
    let adc_var = cfg.adc_noise_w * fs / cfg.adc_bandwidth_hz;
    let front_end = |s: &BasebandSignal, r: &mut SimRng| -> Result<BasebandSignal> {
        let mut v = s.samples().to_vec();
        rng::add_white_noise(&mut v, adc_var, r);
        signal::brickwall_filter(&BasebandSignal::from_parts(v, *s.grid(), s.z_km), cfg.adc_bandwidth_hz)
    };
    let after_l1 = fiber::ssfm_propagate(&x, &cfg.fiber, cfg.l1_km, &cfg.ssfm, &mut noise)?;
    let (tap1, tap2) = fiber::coupler_split(&after_l1);
    let first = slot_taps(&front_end(&tap1, &mut noise)?, sps, &offsets);
    let mut cur = if cfg.mode == LinkMode::Sda {
        fiber::edfa_amplify(&tap2, &cfg.edfa, cfg.fiber.f0_hz, fs, &mut noise)?
    } else {
        tap2
    };
    let mut at = 0.0;
    let mut second = Vec::with_capacity(cfg.l2_km.len());
    for &l2 in &cfg.l2_km {
        cur = fiber::ssfm_propagate(&cur, &cfg.fiber, l2 - at, &cfg.ssfm, &mut noise)?;
        at = l2;
        second.push(slot_taps(&front_end(&cur, &mut noise)?, sps, &offsets));
    }
    Ok(FrameTaps {
        indices,
        symbols,
        first,
        second,
    })
}

/// Least-squares complex weights `w` minimizing `sum |s - w . f|^2`, with a
/// tiny ridge for conditioning.
fn least_squares(features: &[Vec<Complex64>], targets: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = features.first().map(Vec::len).unwrap_or(0);
    let mut a = DMatrix::<Complex64>::zeros(d, d);
    let mut b = DVector::<Complex64>::zeros(d);
    for (f, s) in features.iter().zip(targets) {
        for i in 0..d {
            b[i] += f[i].conj() * s;
            for j in 0..d {
                a[(i, j)] += f[i].conj() * f[j];
            }
        }
    }
    let trace: f64 = (0..d).map(|i| a[(i, i)].re).sum();
    let ridge = 1e-10 * trace / d.max(1) as f64;
    for i in 0..d {
        a[(i, i)] += ridge;
    }
    let w = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("combiner normal equations are singular".into()))?;
    Ok(w.iter().copied().collect())
}

/// Information rate versus second-fiber length.
///
/// Frames are split in half: the combiner and the demapper are fit on the
/// first half and scored on the second. All lengths share the same frames
/// and first-fiber noise.
pub fn soliton_l2_sweep(cfg: &SolitonLinkConfig) -> Result<SolitonSweep> {
    cfg.validate()?;
    let psk = Constellation::psk(cfg.order)?;
    let frames = (0..cfg.n_frames)
        .into_par_iter()
        .map(|f| run_frame(cfg, &psk, rng::derive_seed(cfg.seed, f as u64)))
        .collect::<Result<Vec<_>>>()?;
    let fit_frames = cfg.n_frames / 2;
    let slot_rate = 1.0 / (cfg.slot_t0 * cfg.soliton.t0());
    let mut points = Vec::with_capacity(cfg.l2_km.len());
    for (li, &l2) in cfg.l2_km.iter().enumerate() {
        let feats = |fr: &FrameTaps| -> Vec<Vec<Complex64>> {
            fr.first
                .iter()
                .zip(&fr.second[li])
                .map(|(a, b)| a.iter().chain(b).copied().collect())
                .collect()
        };
        let mut fit_x = Vec::new();
        let mut fit_y = Vec::new();
        for fr in &frames[..fit_frames] {
            fit_x.extend(feats(fr));
            fit_y.extend_from_slice(&fr.symbols);
        }
        let w = least_squares(&fit_x, &fit_y)?;
        let mut obs = Observations::new(cfg.slots_per_frame);
        for fr in &frames {
            let est: Vec<Complex64> = feats(fr)
                .iter()
                .map(|f| f.iter().zip(&w).map(|(a, b)| a * b).sum())
                .collect();
            obs.push_frame(&fr.indices, &est)?;
        }
        let settings = EvalSettings::new(slot_rate, rng::derive_seed(cfg.seed, u64::MAX - li as u64));
        let metrics = metrics::evaluate_observations(&obs, cfg.order, &settings)?;
        points.push(SweepPoint { l2_km: l2, metrics });
    }
    Ok(SolitonSweep { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SolitonLinkConfig {
        SolitonLinkConfig {
            sample_rate: 100e9,
            slots_per_frame: 8,
            n_frames: 8,
            order: 4,
            l1_km: 20.0,
            l2_km: vec![0.0, 10.0],
            ssfm: SsfmConfig::new(5.0, true),
            adc_noise_w: 0.0,
            tap_spacing_ps: 100.0,
            ..Default::default()
        }
    }

    #[test]
    fn frame_places_one_pulse_per_slot() {
        let cfg = tiny();
        let sym = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let x = soliton_frame(&SolitonLinkConfig { slots_per_frame: 2, ..cfg.clone() }, &sym).unwrap();
        let sps = cfg.samples_per_slot().unwrap();
        assert_eq!(x.len(), 2 * sps);
        let p = soliton::soliton_power(&cfg.fiber, 50.0).unwrap();
        // the two-soliton {0.5, 1} peaks at 3 (in units of the fundamental)
        let c0 = x.samples()[sps / 2];
        let c1 = x.samples()[sps + sps / 2];
        assert!((c0.norm() - 3.0 * p.sqrt()).abs() < 1e-3 * p.sqrt());
        assert!((c1 / c0 - Complex64::new(0.0, 1.0)).norm() < 1e-3);
    }

    #[test]
    fn rejects_fractional_slots_and_baseline() {
        let mut c = tiny();
        c.slot_t0 = 16.01;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.mode = LinkMode::Baseline;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.l2_km = vec![10.0, 0.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn least_squares_recovers_weights() {
        let w = [Complex64::new(0.5, -1.0), Complex64::new(2.0, 0.25)];
        let mut r = rng::seeded(3);
        let xs: Vec<Vec<Complex64>> = (0..40)
            .map(|_| vec![rng::complex_gaussian(&mut r, 1.0), rng::complex_gaussian(&mut r, 1.0)])
            .collect();
        let ys: Vec<Complex64> = xs.iter().map(|f| f[0] * w[0] + f[1] * w[1]).collect();
        let est = least_squares(&xs, &ys).unwrap();
        for (a, b) in est.iter().zip(&w) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn noiseless_short_sweep_is_near_perfect() {
        let s = soliton_l2_sweep(&tiny()).unwrap();
        assert_eq!(s.points.len(), 2);
        for p in &s.points {
            assert!(p.metrics.mi_bits > 1.99, "{p:?}");
        }
        assert!(s.argmax().is_some());
    }
}
