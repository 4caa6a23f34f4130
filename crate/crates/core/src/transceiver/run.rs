//! Training and evaluation drivers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{chain_frame, Chain, Nets};
use super::{TrainConfig, TransceiverParams, BOOTSTRAP_STREAM, EVAL_STREAM, TRAIN_STREAM};
use crate::autodiff::{Adam, AdamConfig, Graph, Tensor};
use crate::error::{Error, Result};
use crate::link::LinkMode;
use crate::metrics::{self, EvalSettings, MetricsResult, Observations};
use crate::rng;
use crate::signal;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: TransceiverParams,
    /// Mean cross-entropy in nats per step.
    pub losses: Vec<f64>,
}

/// Cross-entropy loss of the frame drawn from `frame_seed` and its gradient
/// with respect to every trainable tensor, in the order of
/// [`TransceiverParams::trainable_tensors`].
pub fn frame_loss_and_gradients(
    params: &TransceiverParams,
    cfg: &TrainConfig,
    frame_seed: u64,
) -> Result<(f64, Vec<Tensor>)> {
    let chain = Chain::new(params, cfg)?;
    frame_gradients(&chain, params, frame_seed)
}

fn frame_gradients(chain: &Chain, params: &TransceiverParams, frame_seed: u64) -> Result<(f64, Vec<Tensor>)> {
    let (indices, mut noise) = chain.draw_frame(frame_seed);
    let symbols = signal::map_symbols(&indices, &params.constellation)?.symbols;
    let mut g = Graph::new();
    let nets = Nets::bind(params, &mut g);
    let est = chain.forward(&mut g, &nets, &symbols, &mut noise)?;
    let logits = nets.demapper.forward(&mut g, est)?;
    let loss = g.softmax_cross_entropy(logits, &indices)?;
    let grads = g.backward(loss)?;
    let flat = nets
        .trainable()
        .into_iter()
        .flat_map(|n| n.gradients(&grads, &g))
        .collect();
    Ok((g.value(loss).data[0], flat))
}

/// Adam on the mean cross-entropy between transmitted indices and the
/// training demapper, with fresh frames and noise at every step. Frames of a
/// batch run in parallel; their gradients are reduced in frame order, so the
/// result depends only on the configuration and seed.
pub fn train(cfg: &TrainConfig, params0: TransceiverParams) -> Result<TrainOutcome> {
    let chain = Chain::new(&params0, cfg)?;
    let mut params = params0;
    let mut adam = {
        let shapes: Vec<&Tensor> = params.trainable().into_iter().flat_map(|n| n.tensors()).collect();
        Adam::new(
            AdamConfig {
                lr: cfg.learning_rate,
                ..AdamConfig::default()
            },
            &shapes,
        )
    };
    let bs = cfg.frames_per_batch;
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let per_frame = (0..bs)
            .into_par_iter()
            .map(|f| {
                let seed = rng::derive_seed(cfg.seed, TRAIN_STREAM + (step * bs + f) as u64);
                frame_gradients(&chain, &params, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut loss = 0.0;
        let mut grads: Option<Vec<Tensor>> = None;
        for (l, g) in per_frame {
            loss += l;
            match grads.as_mut() {
                None => grads = Some(g),
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| a.add_assign(b)),
            }
        }
        let mut grads = grads.unwrap_or_default();
        loss /= bs as f64;
        for t in grads.iter_mut() {
            t.data.iter_mut().for_each(|v| *v /= bs as f64);
        }
        let lr = cfg.learning_rate_at(step);
        if !loss.is_finite() || grads.iter().any(|t| !t.is_finite()) {
            let last = losses.iter().rev().find(|l: &&f64| l.is_finite());
            return Err(Error::Numerical(format!(
                "training diverged at step {step} (loss {loss}, learning rate {lr:e}, last finite loss {last:?}, non-finite gradient tensors {:?})",
                grads
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| !t.is_finite())
                    .map(|(i, _)| i)
                    .collect::<Vec<_>>()
            )));
        }
        adam.config.lr = lr;
        let mut tensors: Vec<&mut Tensor> = params
            .trainable_mut()
            .into_iter()
            .flat_map(|n| n.tensors_mut())
            .collect();
        adam.step(&mut tensors, &grads)?;
        losses.push(loss);
    }
    Ok(TrainOutcome { params, losses })
}

/// Runs `n_frames` held-out frames through the frozen transceiver. Frame
/// seeds come from the run seed on a stream disjoint from training.
pub fn collect_observations(params: &TransceiverParams, cfg: &TrainConfig, n_frames: usize) -> Result<Observations> {
    let chain = Chain::new(params, cfg)?;
    let frames = (0..n_frames)
        .into_par_iter()
        .map(|f| chain_frame(&chain, params, rng::derive_seed(cfg.seed, EVAL_STREAM + f as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut obs = Observations::new(chain.n_symbols());
    for fr in frames {
        obs.push_frame(&fr.indices, &fr.estimates)?;
    }
    Ok(obs)
}

/// Information rate of the frozen transceiver under the Gaussian demapper,
/// fit on half of the frames and scored on the rest.
pub fn evaluate(params: &TransceiverParams, cfg: &TrainConfig, n_frames: usize) -> Result<MetricsResult> {
    let obs = collect_observations(params, cfg, n_frames)?;
    let settings = EvalSettings::new(cfg.symbol_rate, rng::derive_seed(cfg.seed, BOOTSTRAP_STREAM));
    metrics::evaluate_observations(&obs, params.order(), &settings)
}

/// Machine-readable evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub power_dbm: f64,
    pub l2_km: f64,
    pub mode: LinkMode,
    pub mi_bits: f64,
    pub eta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl EvalReport {
    pub fn new(cfg: &TrainConfig, r: &MetricsResult) -> Self {
        Self {
            power_dbm: cfg.power_dbm,
            l2_km: cfg.topology.l2_km,
            mode: cfg.topology.mode,
            mi_bits: r.mi_bits,
            eta: r.eta,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            seed: cfg.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::SsfmConfig;
    use crate::link::LinkTopology;
    use crate::transceiver::{ChannelKind, Variant};

    fn small(mode: LinkMode, gamma: f64, noise: bool) -> TrainConfig {
        let mut t = LinkTopology::new(mode, 100.0, 20.0, 20e9);
        t.fiber.gamma = gamma;
        t.ssfm = SsfmConfig::new(20.0, true);
        let mut c = TrainConfig::new(t, 0.0, 7);
        c.symbols_per_frame = 32;
        c.frames_per_batch = 2;
        c.noise = noise;
        c
    }

    #[test]
    fn linear_noiseless_evaluation_reaches_log2_m() {
        let cfg = small(LinkMode::Sd, 0.0, false);
        let p = TransceiverParams::new(16, 2, 8, Variant::Aepc, 1).unwrap();
        let r = evaluate(&p, &cfg, 8).unwrap();
        assert!(r.mi_bits > 4.0 - 0.01 && r.mi_bits <= 4.0, "{r:?}");
    }

    #[test]
    fn noise_only_channel_carries_nothing() {
        let mut cfg = small(LinkMode::Sd, 1.27, true);
        cfg.channel = ChannelKind::NoiseOnly;
        cfg.symbols_per_frame = 256;
        let p = TransceiverParams::new(16, 2, 8, Variant::Aec, 1).unwrap();
        let r = evaluate(&p, &cfg, 16).unwrap();
        assert!(r.mi_bits < 0.05, "{r:?}");
    }

    #[test]
    fn training_is_deterministic() {
        let mut cfg = small(LinkMode::Sda, 1.27, true);
        cfg.steps = 3;
        cfg.power_dbm = 4.0;
        let p = TransceiverParams::new(16, 2, 8, Variant::Aepc, 2).unwrap();
        let a = train(&cfg, p.clone()).unwrap();
        let b = train(&cfg, p).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.params, b.params);
        assert_eq!(a.losses.len(), 3);
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        // perturb the first predistortion weight matrix of a noiseless chain
        let mut cfg = small(LinkMode::Sda, 1.27, false);
        cfg.symbols_per_frame = 16;
        cfg.power_dbm = 6.0;
        let mut p = TransceiverParams::new(16, 1, 4, Variant::Aepc, 3).unwrap();
        let mut r = rng::seeded(9);
        p.predistort = crate::autodiff::Mlp::new(&[6, 4, 4, 2], &mut r, false).unwrap();
        p.combine = crate::autodiff::Mlp::new(&[12, 4, 4, 2], &mut r, false).unwrap();
        let chain = Chain::new(&p, &cfg).unwrap();
        let (_, g0) = frame_gradients(&chain, &p, 42).unwrap();
        let w0 = p.predistort.tensors()[0].clone();
        let loss_at = |i: usize, h: f64| -> f64 {
            let mut q = p.clone();
            q.predistort.tensors_mut()[0].data[i] += h;
            frame_gradients(&chain, &q, 42).unwrap().0
        };
        let h = 1e-5;
        let numeric: Vec<f64> = (0..w0.len())
            .map(|i| (loss_at(i, h) - loss_at(i, -h)) / (2.0 * h))
            .collect();
        let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(scale > 0.0);
        let err = g0[0]
            .data
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs())
            .fold(0.0, f64::max)
            / scale;
        assert!(err < 1e-4, "relative error {err}");
    }
}
