//! Reference receivers without learned stages, evaluated on the same frames
//! and noise draws as the learned transceiver.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{TrainConfig, BOOTSTRAP_STREAM, EVAL_STREAM};
use crate::equalizer::{self, DbpConfig};
use crate::error::Result;
use crate::link::{self, LinkMode};
use crate::metrics::{self, EvalSettings, MetricsResult, Observations};
use crate::rng;
use crate::signal::{self, Constellation, SamplingGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassicalReceiver {
    /// Dispersion compensation only.
    Cdc,
    /// Backpropagation split between transmitter and receiver.
    SplitDbp(DbpConfig),
}

/// Pushes one frame through the single-observation link and the classical
/// receiver. Returns the labels and the symbol estimates scaled back to the
/// constellation.
pub fn classical_frame(
    cfg: &TrainConfig,
    constellation: &Constellation,
    rx: &ClassicalReceiver,
    frame_seed: u64,
) -> Result<(Vec<usize>, Vec<Complex64>)> {
    let m = constellation.order();
    cfg.validate(m)?;
    let mut topo = cfg.effective_topology();
    topo.mode = LinkMode::Baseline;
    let grid = SamplingGrid::new(cfg.symbol_rate, cfg.samples_per_symbol, cfg.symbols_per_frame)?;

    let mut idx_rng = rng::seeded(rng::derive_seed(frame_seed, 0));
    let indices = rng::balanced_indices(&mut idx_rng, m, cfg.symbols_per_frame);
    let mut noise = rng::seeded(rng::derive_seed(frame_seed, 1));

    let power = signal::dbm_to_watts(cfg.power_dbm);
    let frame = signal::map_symbols(&indices, constellation)?;
    let x = signal::brickwall_filter(&signal::upsample(&frame, grid)?, cfg.symbol_rate)?;
    let mut x = signal::normalize_power(&x, power)?;
    if let ClassicalReceiver::SplitDbp(d) = rx {
        x = equalizer::split_dbp_predistort(&x, &topo.fiber, topo.l1_km, d)?;
    }
    let y = link::simulate_link(&x, &topo, &mut noise)?.y1;
    // undo the coupler so the receiver sees the launch power scale
    let y = y.scaled(std::f64::consts::SQRT_2);
    let y = match rx {
        ClassicalReceiver::Cdc => equalizer::cdc(&y, topo.fiber.beta2_ps2_per_km, topo.l1_km),
        ClassicalReceiver::SplitDbp(d) => equalizer::split_dbp_receive(&y, &topo.fiber, topo.l1_km, d)?,
    };
    let y = signal::brickwall_filter(&y, cfg.symbol_rate)?;
    let s = 1.0 / power.sqrt();
    let est = signal::downsample(&y, 0)?.symbols.into_iter().map(|v| v * s).collect();
    Ok((indices, est))
}

/// Observations of the classical receiver on the held-out evaluation frames.
pub fn classical_observations(
    cfg: &TrainConfig,
    constellation: &Constellation,
    rx: &ClassicalReceiver,
    n_frames: usize,
) -> Result<Observations> {
    let frames = (0..n_frames)
        .into_par_iter()
        .map(|f| classical_frame(cfg, constellation, rx, rng::derive_seed(cfg.seed, EVAL_STREAM + f as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut obs = Observations::new(cfg.symbols_per_frame);
    for (l, s) in frames {
        obs.push_frame(&l, &s)?;
    }
    Ok(obs)
}

pub fn evaluate_classical(
    cfg: &TrainConfig,
    constellation: &Constellation,
    rx: &ClassicalReceiver,
    n_frames: usize,
) -> Result<MetricsResult> {
    let obs = classical_observations(cfg, constellation, rx, n_frames)?;
    let settings = EvalSettings::new(cfg.symbol_rate, rng::derive_seed(cfg.seed, BOOTSTRAP_STREAM));
    metrics::evaluate_observations(&obs, constellation.order(), &settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::SsfmConfig;
    use crate::link::LinkTopology;
    use crate::transceiver::{run_frame, TransceiverParams, Variant};

    fn cfg(gamma: f64, noise: bool) -> TrainConfig {
        let mut t = LinkTopology::new(LinkMode::Baseline, 100.0, 0.0, 20e9);
        t.fiber.gamma = gamma;
        t.ssfm = SsfmConfig::new(10.0, true);
        let mut c = TrainConfig::new(t, 2.0, 5);
        c.symbols_per_frame = 32;
        c.noise = noise;
        c
    }

    #[test]
    fn cdc_matches_untrained_compensating_transceiver() {
        // zero-output residual networks leave the first path untouched
        let c = cfg(1.27, true);
        let p = TransceiverParams::new(16, 2, 8, Variant::Aec, 1).unwrap();
        let learned = run_frame(&p, &c, 77).unwrap();
        let (labels, est) = classical_frame(&c, &p.constellation, &ClassicalReceiver::Cdc, 77).unwrap();
        assert_eq!(labels, learned.indices);
        let scale: f64 = est.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in est.iter().zip(&learned.estimates) {
            assert!((a - b).norm() < 1e-9 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn noiseless_dbp_recovers_symbols() {
        let mut c = cfg(1.27, false);
        // a full-rate front end keeps the broadened spectrum
        c.topology.adc_bandwidth_hz = 80e9;
        let p = Constellation::for_order(16).unwrap();
        let d = DbpConfig {
            steps_per_km: 0.1,
            ..Default::default()
        };
        let (labels, est) = classical_frame(&c, &p, &ClassicalReceiver::SplitDbp(d), 3).unwrap();
        for (l, e) in labels.iter().zip(&est) {
            assert!((e - p.points()[*l]).norm() < 1e-6, "{e} vs {}", p.points()[*l]);
        }
    }
}
