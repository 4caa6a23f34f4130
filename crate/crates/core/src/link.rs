//! Two-tap diversity link: first fiber, 3 dB coupler, a direct band-limited
//! observation, and a second observation taken after an optional amplifier
//! and a second fiber.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{self, EdfaSpec, FiberSpec, SsfmConfig};
use crate::rng::{self, SimRng};
use crate::signal::{self, BasebandSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    /// Single observation duplicated on both receiver inputs.
    Baseline,
    /// Second observation after `l2` km more fiber.
    Sd,
    /// As `Sd` with an amplifier undoing the coupler loss first.
    Sda,
}

impl LinkMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinkMode::Baseline => "baseline",
            LinkMode::Sd => "sd",
            LinkMode::Sda => "sda",
        }
    }

    /// Amplitude gain from launch to the second observation, excluding fiber
    /// effects.
    pub fn second_path_gain(&self, edfa: &EdfaSpec) -> f64 {
        match self {
            LinkMode::Baseline | LinkMode::Sd => std::f64::consts::FRAC_1_SQRT_2,
            LinkMode::Sda => (edfa.gain_linear() / 2.0).sqrt(),
        }
    }
}

impl std::str::FromStr for LinkMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" | "base" => Ok(LinkMode::Baseline),
            "sd" => Ok(LinkMode::Sd),
            "sda" => Ok(LinkMode::Sda),
            other => Err(Error::Config(format!("unknown link mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for LinkMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTopology {
    pub mode: LinkMode,
    pub l1_km: f64,
    pub l2_km: f64,
    /// Receiver front-end bandwidth in Hz.
    pub adc_bandwidth_hz: f64,
    pub fiber: FiberSpec,
    pub edfa: EdfaSpec,
    pub ssfm: SsfmConfig,
    /// Receiver front-end noise power in W within the ADC band, drawn
    /// independently per observation. Zero by default.
    pub adc_noise_w: f64,
}

impl LinkTopology {
    pub fn new(mode: LinkMode, l1_km: f64, l2_km: f64, adc_bandwidth_hz: f64) -> Self {
        Self {
            mode,
            l1_km,
            l2_km,
            adc_bandwidth_hz,
            fiber: FiberSpec::standard(),
            edfa: EdfaSpec::default(),
            ssfm: SsfmConfig::default(),
            adc_noise_w: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l1_km > 0.0) {
            return Err(Error::invalid("first fiber length must be positive"));
        }
        if !(self.l2_km >= 0.0) {
            return Err(Error::invalid("second fiber length must be non-negative"));
        }
        if !(self.adc_bandwidth_hz > 0.0) {
            return Err(Error::invalid("ADC bandwidth must be positive"));
        }
        if !(self.adc_noise_w >= 0.0) {
            return Err(Error::invalid("ADC noise power must be non-negative"));
        }
        if !(self.edfa.gain_db >= 0.0) {
            return Err(Error::invalid("amplifier gain must be non-negative"));
        }
        self.ssfm.n_steps(self.l1_km)?;
        if self.mode != LinkMode::Baseline {
            self.ssfm.n_steps(self.l2_km)?;
        }
        Ok(())
    }

    /// Total length seen by the second observation.
    pub fn second_tap_km(&self) -> f64 {
        match self.mode {
            LinkMode::Baseline => self.l1_km,
            _ => self.l1_km + self.l2_km,
        }
    }

    /// Per-sample variance of the front-end noise before band limiting.
    pub fn adc_noise_variance(&self, sample_rate: f64) -> f64 {
        self.adc_noise_w * sample_rate / self.adc_bandwidth_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutput {
    pub y1: BasebandSignal,
    pub y2: BasebandSignal,
}

/// Runs the link. Random draws happen in a fixed order (first fiber, first
/// front end, amplifier, second fiber, second front end), so every mode
/// shares the first-fiber noise for a given seed.
pub fn simulate_link(x: &BasebandSignal, topo: &LinkTopology, rng: &mut SimRng) -> Result<LinkOutput> {
    topo.validate()?;
    let fs = x.grid().sample_rate();
    signal::check_bandwidth(topo.adc_bandwidth_hz, fs)?;
    let adc_var = topo.adc_noise_variance(fs);
    let front_end = |s: BasebandSignal, rng: &mut SimRng| -> Result<BasebandSignal> {
        let mut s = s;
        rng::add_white_noise(s.samples_mut(), adc_var, rng);
        signal::brickwall_filter(&s, topo.adc_bandwidth_hz)
    };

    let after_l1 = fiber::ssfm_propagate(x, &topo.fiber, topo.l1_km, &topo.ssfm, rng)?;
    let (tap1, tap2) = fiber::coupler_split(&after_l1);
    let y1 = front_end(tap1, rng)?;
    let y2 = match topo.mode {
        LinkMode::Baseline => y1.clone(),
        LinkMode::Sd | LinkMode::Sda => {
            let mut s = tap2;
            if topo.mode == LinkMode::Sda {
                s = fiber::edfa_amplify(&s, &topo.edfa, topo.fiber.f0_hz, fs, rng)?;
            }
            let s = fiber::ssfm_propagate(&s, &topo.fiber, topo.l2_km, &topo.ssfm, rng)?;
            front_end(s, rng)?
        }
    };
    Ok(LinkOutput { y1, y2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SamplingGrid;
    use num_complex::Complex64;

    fn input(power: f64) -> BasebandSignal {
        let g = SamplingGrid::new(10e9, 4, 32).unwrap();
        let mut r = rng::seeded(4);
        let s: Vec<Complex64> = (0..g.n_samples())
            .map(|_| rng::complex_gaussian(&mut r, 1.0))
            .collect();
        let x = signal::brickwall_filter(&BasebandSignal::new(s, g).unwrap(), 10e9).unwrap();
        signal::normalize_power(&x, power).unwrap()
    }

    fn topo(mode: LinkMode, l2: f64) -> LinkTopology {
        let mut t = LinkTopology::new(mode, 50.0, l2, 20e9);
        t.ssfm = SsfmConfig::new(5.0, true);
        t
    }

    #[test]
    fn empty_second_fiber_duplicates() {
        let mut t = topo(LinkMode::Sd, 0.0);
        t.fiber = t.fiber.linear_only().noiseless();
        let out = simulate_link(&input(1e-3), &t, &mut rng::seeded(1)).unwrap();
        assert_eq!(out.y1, out.y2);
    }

    #[test]
    fn amplifier_restores_coupler_loss() {
        let mut t = topo(LinkMode::Sda, 0.0);
        t.fiber = t.fiber.linear_only().noiseless();
        t.edfa.nsp = 0.0;
        let x = input(1e-3);
        let out = simulate_link(&x, &t, &mut rng::seeded(1)).unwrap();
        let p1 = signal::measure_power(&out.y1).watts;
        let p2 = signal::measure_power(&out.y2).watts;
        assert!((p2 - 2.0 * p1).abs() < 1e-12 * p2);
        assert!((p2 - signal::measure_power(&x).watts).abs() < 1e-12 * p2);
    }

    #[test]
    fn sd_and_sda_agree_without_gain() {
        let mut sd = topo(LinkMode::Sd, 0.0);
        sd.fiber = sd.fiber.noiseless();
        let mut sda = sd;
        sda.mode = LinkMode::Sda;
        sda.edfa.gain_db = 0.0;
        let x = input(2e-3);
        let a = simulate_link(&x, &sd, &mut rng::seeded(3)).unwrap();
        let b = simulate_link(&x, &sda, &mut rng::seeded(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_reproduce_and_modes_share_first_fiber() {
        let x = input(2e-3);
        let a = simulate_link(&x, &topo(LinkMode::Sda, 20.0), &mut rng::seeded(9)).unwrap();
        let b = simulate_link(&x, &topo(LinkMode::Sda, 20.0), &mut rng::seeded(9)).unwrap();
        assert_eq!(a, b);
        let base = simulate_link(&x, &topo(LinkMode::Baseline, 20.0), &mut rng::seeded(9)).unwrap();
        assert_eq!(base.y1, a.y1);
        assert_eq!(base.y1, base.y2);
        assert!((a.y2.z_km - a.y1.z_km - 20.0).abs() < 1e-12);
    }

    #[test]
    fn front_end_noise_is_independent_per_path() {
        let mut t = topo(LinkMode::Sd, 0.0);
        t.fiber = t.fiber.noiseless();
        t.adc_noise_w = 1e-6;
        let out = simulate_link(&input(1e-3), &t, &mut rng::seeded(2)).unwrap();
        assert_ne!(out.y1, out.y2);
        assert!(simulate_link(&input(1e-3), &topo(LinkMode::Sd, 7.0), &mut rng::seeded(2)).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("SDA".parse::<LinkMode>().unwrap(), LinkMode::Sda);
        assert!("x".parse::<LinkMode>().is_err());
    }
}
