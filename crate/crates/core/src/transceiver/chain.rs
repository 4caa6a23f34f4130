//! The transmitter, link and receiver as one differentiable graph.
//!
//! Random draws follow [`crate::link::simulate_link`] exactly, so a frame
//! pushed through this graph sees the same noise as the plain simulator.

use std::sync::Arc;

use num_complex::Complex64;

use super::{ChannelKind, TrainConfig, TransceiverParams};
use crate::autodiff::{BoundMlp, Graph, SsfmStep, Tensor, Var};
use crate::error::Result;
use crate::fiber;
use crate::link::{LinkMode, LinkTopology};
use crate::rng::{self, SimRng};
use crate::signal::{self, SamplingGrid};

/// Precomputed responses and constants for one configuration.
pub(crate) struct Chain {
    topo: LinkTopology,
    channel: ChannelKind,
    m: usize,
    sps: usize,
    n_symbols: usize,
    window_k: usize,
    energy: f64,
    power: f64,
    tx_shape: Arc<[Complex64]>,
    front_end: Arc<[Complex64]>,
    rx1: Arc<[Complex64]>,
    rx2: Arc<[Complex64]>,
    step: SsfmStep,
    steps1: usize,
    steps2: usize,
    fiber_var: f64,
    adc_var: f64,
    amp_gain: f64,
    amp_var: f64,
    rx_scale1: f64,
    rx_scale2: f64,
}

impl Chain {
    pub(crate) fn new(params: &TransceiverParams, cfg: &TrainConfig) -> Result<Self> {
        params.validate()?;
        let m = params.order();
        cfg.validate(m)?;
        let topo = cfg.effective_topology();
        let grid = SamplingGrid::new(cfg.symbol_rate, cfg.samples_per_symbol, cfg.symbols_per_frame)?;
        let n = grid.n_samples();
        let fs = grid.sample_rate();
        signal::check_bandwidth(topo.adc_bandwidth_hz, fs)?;
        let beta2 = topo.fiber.beta2();
        let shape = signal::brickwall_response(n, fs, cfg.symbol_rate);
        let rx = |length_km: f64| -> Arc<[Complex64]> {
            fiber::dispersion_response(n, fs, beta2, -length_km)
                .into_iter()
                .zip(&shape)
                .map(|(c, s)| c * s)
                .collect()
        };
        let power = signal::dbm_to_watts(cfg.power_dbm);
        let dz = topo.ssfm.step_km;
        let fiber_var = if topo.ssfm.noise_enabled {
            fiber::ase_sigma2(&topo.fiber, dz, topo.ssfm.noise_bandwidth_hz.unwrap_or(fs))
        } else {
            0.0
        };
        let coupler = std::f64::consts::FRAC_1_SQRT_2;
        let rx_scale = |g: f64| 1.0 / (g * power.sqrt());
        Ok(Self {
            topo,
            channel: cfg.channel,
            m,
            sps: cfg.samples_per_symbol,
            n_symbols: cfg.symbols_per_frame,
            window_k: params.window_k,
            energy: power * n as f64,
            power,
            tx_shape: shape.clone().into(),
            front_end: signal::brickwall_response(n, fs, topo.adc_bandwidth_hz).into(),
            rx1: rx(topo.l1_km),
            rx2: rx(topo.second_tap_km()),
            step: SsfmStep::new(n, fs, &topo.fiber, dz),
            steps1: topo.ssfm.n_steps(topo.l1_km)?,
            steps2: if topo.mode == LinkMode::Baseline {
                0
            } else {
                topo.ssfm.n_steps(topo.l2_km)?
            },
            fiber_var,
            adc_var: topo.adc_noise_variance(fs),
            amp_gain: topo.edfa.gain_linear().sqrt(),
            amp_var: fiber::edfa_noise_power(&topo.edfa, topo.fiber.f0_hz, fs),
            rx_scale1: rx_scale(coupler),
            rx_scale2: rx_scale(topo.mode.second_path_gain(&topo.edfa)),
        })
    }

    pub(crate) fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    /// Frame indices and the noise stream for a frame seed.
    pub(crate) fn draw_frame(&self, frame_seed: u64) -> (Vec<usize>, SimRng) {
        let mut idx_rng = rng::seeded(rng::derive_seed(frame_seed, 0));
        let idx = rng::balanced_indices(&mut idx_rng, self.m, self.n_symbols);
        (idx, rng::seeded(rng::derive_seed(frame_seed, 1)))
    }

    fn noise(&self, rows: usize, variance: f64, rng: &mut SimRng) -> Tensor {
        let mut v = vec![Complex64::new(0.0, 0.0); rows];
        rng::add_white_noise(&mut v, variance, rng);
        Tensor::from_complex(&v)
    }

    fn front_end(&self, g: &mut Graph, x: Var, rng: &mut SimRng) -> Result<Var> {
        let x = if self.adc_var > 0.0 {
            let c = self.noise(g.value(x).rows, self.adc_var, rng);
            g.shift(x, &c)?
        } else {
            x
        };
        g.filter(x, self.front_end.clone())
    }

    /// Launch signal from transmitted symbols.
    pub(crate) fn transmit(&self, g: &mut Graph, nets: &Nets, symbols: Var) -> Result<Var> {
        let s = match &nets.predistort {
            Some(net) => {
                let w = g.windows(symbols, self.window_k)?;
                let c = net.forward(g, w)?;
                g.add(symbols, c)?
            }
            None => symbols,
        };
        let up = g.upsample(s, self.sps)?;
        let shaped = g.filter(up, self.tx_shape.clone())?;
        g.normalize(shaped, self.energy)
    }

    /// Both receiver inputs.
    pub(crate) fn link(&self, g: &mut Graph, x: Var, rng: &mut SimRng) -> Result<(Var, Var)> {
        if self.channel == ChannelKind::NoiseOnly {
            let rows = g.value(x).rows;
            let a = self.noise(rows, self.power, rng);
            let b = self.noise(rows, self.power, rng);
            let (a, b) = (g.leaf(a), g.leaf(b));
            return Ok((g.filter(a, self.front_end.clone())?, g.filter(b, self.front_end.clone())?));
        }
        let a = g.ssfm(x, &self.step, self.steps1, self.fiber_var, rng)?;
        let tap = g.scale(a, std::f64::consts::FRAC_1_SQRT_2);
        let y1 = self.front_end(g, tap, rng)?;
        let y2 = match self.topo.mode {
            LinkMode::Baseline => y1,
            mode => {
                let mut s = tap;
                if mode == LinkMode::Sda {
                    s = g.scale(s, self.amp_gain);
                    if self.amp_var > 0.0 {
                        let c = self.noise(g.value(s).rows, self.amp_var, rng);
                        s = g.shift(s, &c)?;
                    }
                }
                let s = g.ssfm(s, &self.step, self.steps2, self.fiber_var, rng)?;
                self.front_end(g, s, rng)?
            }
        };
        Ok((y1, y2))
    }

    /// Symbol estimates from both receiver inputs.
    pub(crate) fn receive(&self, g: &mut Graph, nets: &Nets, y1: Var, y2: Var) -> Result<Var> {
        let path = |g: &mut Graph, y: Var, h: &Arc<[Complex64]>, s: f64| -> Result<Var> {
            let f = g.filter(y, h.clone())?;
            let d = g.downsample(f, self.sps, 0)?;
            Ok(g.scale(d, s))
        };
        let r1 = path(g, y1, &self.rx1, self.rx_scale1)?;
        let r2 = if y2 == y1 {
            r1
        } else {
            path(g, y2, &self.rx2, self.rx_scale2)?
        };
        match &nets.combine {
            Some(net) => {
                let w1 = g.windows(r1, self.window_k)?;
                let w2 = g.windows(r2, self.window_k)?;
                let f = g.concat(w1, w2)?;
                let c = net.forward(g, f)?;
                g.add(r1, c)
            }
            None => Ok(r1),
        }
    }

    /// Transmit, propagate and receive one frame.
    pub(crate) fn forward(
        &self,
        g: &mut Graph,
        nets: &Nets,
        symbols: &[Complex64],
        rng: &mut SimRng,
    ) -> Result<Var> {
        let s = g.complex_leaf(symbols);
        let x = self.transmit(g, nets, s)?;
        let (y1, y2) = self.link(g, x, rng)?;
        self.receive(g, nets, y1, y2)
    }
}

/// Networks registered on one graph; inactive stages are `None`.
pub(crate) struct Nets {
    pub(crate) predistort: Option<BoundMlp>,
    pub(crate) combine: Option<BoundMlp>,
    pub(crate) demapper: BoundMlp,
}

impl Nets {
    pub(crate) fn bind(params: &TransceiverParams, g: &mut Graph) -> Self {
        Self {
            predistort: params.variant.predistorts().then(|| params.predistort.bind(g)),
            combine: params.variant.combines().then(|| params.combine.bind(g)),
            demapper: params.train_demapper.bind(g),
        }
    }

    /// Bound networks in the order of [`TransceiverParams::trainable`].
    pub(crate) fn trainable(&self) -> Vec<&BoundMlp> {
        self.predistort
            .iter()
            .chain(self.combine.iter())
            .chain(std::iter::once(&self.demapper))
            .collect()
    }
}

/// One evaluated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub indices: Vec<usize>,
    pub symbols: Vec<Complex64>,
    pub estimates: Vec<Complex64>,
}

/// Runs the frozen transceiver on the frame drawn from `frame_seed`.
pub fn run_frame(params: &TransceiverParams, cfg: &TrainConfig, frame_seed: u64) -> Result<FrameResult> {
    let chain = Chain::new(params, cfg)?;
    chain_frame(&chain, params, frame_seed)
}

pub(crate) fn chain_frame(chain: &Chain, params: &TransceiverParams, frame_seed: u64) -> Result<FrameResult> {
    let (indices, mut noise) = chain.draw_frame(frame_seed);
    let symbols = signal::map_symbols(&indices, &params.constellation)?.symbols;
    let mut g = Graph::no_grad();
    let nets = Nets::bind(params, &mut g);
    let out = chain.forward(&mut g, &nets, &symbols, &mut noise)?;
    Ok(FrameResult {
        indices,
        symbols,
        estimates: g.value(out).to_complex(),
    })
}
