//! Classical receivers: chromatic dispersion compensation and (split) digital
//! backpropagation.

use crate::error::{Error, Result};
use crate::fft;
use crate::fiber::{self, FiberSpec, SsfmConfig};
use crate::rng;
use crate::signal::{self, BasebandSignal};

/// Settings for digital backpropagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbpConfig {
    pub steps_per_km: f64,
    /// Rate at which the backpropagation runs; `None` keeps the input rate.
    /// A reduced rate must divide the input rate by an integer factor that
    /// also divides the samples per symbol.
    pub bandwidth_hz: Option<f64>,
    /// Share of the link back-propagated at the transmitter.
    pub split_fraction: f64,
}

impl Default for DbpConfig {
    fn default() -> Self {
        Self {
            steps_per_km: 1.0,
            bandwidth_hz: None,
            split_fraction: 0.5,
        }
    }
}

impl DbpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.steps_per_km > 0.0) {
            return Err(Error::invalid("backpropagation needs a positive step density"));
        }
        if !(0.0..=1.0).contains(&self.split_fraction) {
            return Err(Error::invalid("split fraction must lie in [0, 1]"));
        }
        if let Some(b) = self.bandwidth_hz {
            if !(b > 0.0) {
                return Err(Error::invalid("backpropagation bandwidth must be positive"));
            }
        }
        Ok(())
    }

    fn ssfm(&self) -> SsfmConfig {
        SsfmConfig::new(1.0 / self.steps_per_km, false)
    }

    fn decimation(&self, sample_rate: f64) -> Result<usize> {
        let Some(b) = self.bandwidth_hz else {
            return Ok(1);
        };
        if b > sample_rate * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "backpropagation bandwidth {b:e} Hz exceeds the sample rate {sample_rate:e} Hz"
            )));
        }
        let r = sample_rate / b;
        let f = r.round();
        if (r - f).abs() > 1e-9 * r {
            return Err(Error::invalid(format!(
                "sample rate {sample_rate:e} Hz is not an integer multiple of {b:e} Hz"
            )));
        }
        Ok(f as usize)
    }
}

/// Ideal dispersion compensation over `length_km`: the exact inverse of the
/// fiber's linear response.
pub fn cdc(x: &BasebandSignal, beta2_ps2_per_km: f64, length_km: f64) -> BasebandSignal {
    let h = fiber::dispersion_response(
        x.len(),
        x.grid().sample_rate(),
        beta2_ps2_per_km * 1e-24,
        -length_km,
    );
    let mut buf = x.samples().to_vec();
    fft::apply_transfer(&mut buf, &h);
    BasebandSignal::from_parts(buf, *x.grid(), x.z_km)
}

/// Noiseless propagation through the reversed fiber. With a reduced
/// bandwidth the input is band-limited and decimated first and the result is
/// returned at the reduced rate.
pub fn dbp(
    x: &BasebandSignal,
    fiber: &FiberSpec,
    length_km: f64,
    cfg: &DbpConfig,
) -> Result<BasebandSignal> {
    cfg.validate()?;
    let factor = cfg.decimation(x.grid().sample_rate())?;
    let input = signal::decimate(x, factor)?;
    let mut rng = rng::seeded(0);
    let mut y = fiber::ssfm_propagate(&input, &fiber.reversed(), length_km, &cfg.ssfm(), &mut rng)?;
    y.z_km = x.z_km - length_km;
    Ok(y)
}

/// Transmitter-side share of split backpropagation: back-propagates the
/// ideal waveform over `split_fraction * length_km` and returns it on the
/// input grid, ready for launch.
pub fn split_dbp_predistort(
    x: &BasebandSignal,
    fiber: &FiberSpec,
    length_km: f64,
    cfg: &DbpConfig,
) -> Result<BasebandSignal> {
    cfg.validate()?;
    let factor = cfg.decimation(x.grid().sample_rate())?;
    let y = dbp(x, fiber, cfg.split_fraction * length_km, cfg)?;
    let mut y = signal::interpolate(&y, factor)?;
    y.z_km = x.z_km;
    Ok(y)
}

/// Receiver-side share of split backpropagation over the remaining
/// `(1 - split_fraction) * length_km`.
pub fn split_dbp_receive(
    y: &BasebandSignal,
    fiber: &FiberSpec,
    length_km: f64,
    cfg: &DbpConfig,
) -> Result<BasebandSignal> {
    dbp(y, fiber, (1.0 - cfg.split_fraction) * length_km, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SamplingGrid;
    use num_complex::Complex64;

    fn rel(a: &BasebandSignal, b: &BasebandSignal) -> f64 {
        let num: f64 = a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        (num / b.energy()).sqrt()
    }

    fn frame(grid: SamplingGrid, power: f64, seed: u64) -> BasebandSignal {
        let mut r = rng::seeded(seed);
        let s: Vec<Complex64> = (0..grid.n_samples())
            .map(|_| rng::complex_gaussian(&mut r, 1.0))
            .collect();
        let x = BasebandSignal::new(s, grid).unwrap();
        let x = signal::brickwall_filter(&x, grid.symbol_rate()).unwrap();
        signal::normalize_power(&x, power).unwrap()
    }

    #[test]
    fn cdc_group_property_and_identity() {
        let g = SamplingGrid::new(20e9, 4, 32).unwrap();
        let x = frame(g, 1e-3, 1);
        let y = cdc(&cdc(&x, -21.67, 300.0), -21.67, -300.0);
        assert!(rel(&y, &x) < 1e-12);
        assert!(rel(&cdc(&x, -21.67, 0.0), &x) < 1e-15);
        assert!((cdc(&x, -21.67, 500.0).energy() - x.energy()).abs() / x.energy() < 1e-12);
    }

    #[test]
    fn dbp_reduces_to_cdc_without_kerr() {
        let g = SamplingGrid::new(20e9, 4, 32).unwrap();
        let x = frame(g, 1e-3, 2);
        let f = FiberSpec::standard().linear_only();
        let a = dbp(&x, &f, 100.0, &DbpConfig::default()).unwrap();
        let b = cdc(&x, f.beta2_ps2_per_km, 100.0);
        assert!(rel(&a, &b) < 1e-12);
    }

    #[test]
    fn split_compositions() {
        let g = SamplingGrid::new(20e9, 4, 32).unwrap();
        let x = frame(g, 3e-3, 3);
        let f = FiberSpec::standard().noiseless();
        let quiet = SsfmConfig::new(1.0, false);
        for frac in [0.0, 0.5, 1.0] {
            let cfg = DbpConfig {
                split_fraction: frac,
                ..DbpConfig::default()
            };
            let tx = split_dbp_predistort(&x, &f, 100.0, &cfg).unwrap();
            let y = fiber::ssfm_propagate(&tx, &f, 100.0, &quiet, &mut rng::seeded(0)).unwrap();
            if frac == 1.0 {
                assert!(rel(&y, &x) < 1e-9);
            }
            let r = split_dbp_receive(&y, &f, 100.0, &cfg).unwrap();
            assert!(rel(&r, &x) < 1e-9, "fraction {frac}: {}", rel(&r, &x));
        }
    }

    #[test]
    fn reduced_rate_must_divide() {
        let g = SamplingGrid::new(20e9, 4, 8).unwrap();
        let x = frame(g, 1e-3, 4);
        let cfg = DbpConfig {
            bandwidth_hz: Some(30e9),
            ..DbpConfig::default()
        };
        assert!(dbp(&x, &FiberSpec::standard(), 10.0, &cfg).is_err());
        let cfg = DbpConfig {
            bandwidth_hz: Some(40e9),
            ..DbpConfig::default()
        };
        let y = dbp(&x, &FiberSpec::standard(), 10.0, &cfg).unwrap();
        assert_eq!(y.grid().sample_rate(), 40e9);
    }
}
