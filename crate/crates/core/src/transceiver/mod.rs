//! End-to-end learned transceiver over the diversity link.
//!
//! Transmit chain: mapper, windowed residual predistortion network,
//! upsampler, brickwall pulse shaper and power normalizer. Receive chain:
//! per-path ideal dispersion compensation, symbol-rate lowpass and
//! downsampling, then a residual network combining windows of both paths.
//! A small classifier supplies the training loss; evaluation replaces it by
//! the Gaussian demapper of [`crate::metrics`].

mod chain;
mod classical;
mod run;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{self, CheckpointManifest, Mlp, Tensor};
use crate::error::{Error, Result};
use crate::fiber::SsfmConfig;
use crate::link::{LinkMode, LinkTopology};
use crate::rng;
use crate::signal::Constellation;

pub use chain::{FrameResult, run_frame};
pub use classical::{classical_frame, classical_observations, evaluate_classical, ClassicalReceiver};
pub use run::{collect_observations, evaluate, frame_loss_and_gradients, train, EvalReport, TrainOutcome};

/// Which learned stages are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Transmitter predistortion only.
    Aep,
    /// Receiver combining only.
    Aec,
    /// Both.
    Aepc,
}

impl Variant {
    pub fn predistorts(&self) -> bool {
        matches!(self, Variant::Aep | Variant::Aepc)
    }

    pub fn combines(&self) -> bool {
        matches!(self, Variant::Aec | Variant::Aepc)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Aep => "aep",
            Variant::Aec => "aec",
            Variant::Aepc => "aepc",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aep" => Ok(Variant::Aep),
            "aec" => Ok(Variant::Aec),
            "aepc" => Ok(Variant::Aepc),
            other => Err(Error::Config(format!("unknown transceiver variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What sits between transmitter and receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    /// The diversity link.
    Link,
    /// Both receiver inputs replaced by white noise of the launch power,
    /// independent of the transmitted frame.
    NoiseOnly,
}

/// Learned networks plus the fixed constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransceiverParams {
    pub constellation: Constellation,
    /// Maps a window of `2k + 1` symbols to a complex correction.
    pub predistort: Mlp,
    /// Maps windows of both received paths to a complex correction.
    pub combine: Mlp,
    /// Training-only classifier from one complex symbol to `M` logits.
    pub train_demapper: Mlp,
    pub window_k: usize,
    pub variant: Variant,
}

impl TransceiverParams {
    /// Fresh parameters. Both correction networks start at zero output, so
    /// the untrained transceiver is the classic linear system.
    pub fn new(m: usize, window_k: usize, hidden: usize, variant: Variant, seed: u64) -> Result<Self> {
        let constellation = Constellation::for_order(m)?;
        let w = 2 * window_k + 1;
        let mut r = rng::seeded(seed);
        let predistort = Mlp::new(&[2 * w, hidden, hidden, 2], &mut r, true)?;
        let combine = Mlp::new(&[4 * w, hidden, hidden, 2], &mut r, true)?;
        let train_demapper = Mlp::new(&[2, hidden, hidden, m], &mut r, false)?;
        Ok(Self {
            constellation,
            predistort,
            combine,
            train_demapper,
            window_k,
            variant,
        })
    }

    pub fn order(&self) -> usize {
        self.constellation.order()
    }

    /// Parameters of the active transceiver networks. The combiner always
    /// sees two paths (the baseline feeds a duplicate), so the count does
    /// not depend on the link mode. The training demapper is excluded.
    pub fn n_params(&self) -> usize {
        let mut n = 0;
        if self.variant.predistorts() {
            n += self.predistort.n_params();
        }
        if self.variant.combines() {
            n += self.combine.n_params();
        }
        n
    }

    pub fn validate(&self) -> Result<()> {
        let w = 2 * self.window_k + 1;
        let m = self.order();
        let check = |net: &Mlp, input: usize, output: usize, what: &str| -> Result<()> {
            if net.input_size() != input || net.output_size() != output {
                return Err(Error::invalid(format!(
                    "{what} network maps {} -> {}, expected {input} -> {output}",
                    net.input_size(),
                    net.output_size()
                )));
            }
            Ok(())
        };
        check(&self.predistort, 2 * w, 2, "predistortion")?;
        check(&self.combine, 4 * w, 2, "combining")?;
        check(&self.train_demapper, 2, m, "demapper")
    }

    /// Trainable networks in optimizer order.
    fn trainable(&self) -> Vec<&Mlp> {
        let mut v = Vec::new();
        if self.variant.predistorts() {
            v.push(&self.predistort);
        }
        if self.variant.combines() {
            v.push(&self.combine);
        }
        v.push(&self.train_demapper);
        v
    }

    /// Trainable tensors: predistorter, combiner (when active), then the
    /// training demapper.
    pub fn trainable_tensors(&self) -> Vec<&Tensor> {
        self.trainable().into_iter().flat_map(|n| n.tensors()).collect()
    }

    /// Mutable view in the order of [`Self::trainable_tensors`].
    pub fn trainable_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.trainable_mut().into_iter().flat_map(|n| n.tensors_mut()).collect()
    }

    fn trainable_mut(&mut self) -> Vec<&mut Mlp> {
        let mut v = Vec::new();
        let variant = self.variant;
        if variant.predistorts() {
            v.push(&mut self.predistort);
        }
        if variant.combines() {
            v.push(&mut self.combine);
        }
        v.push(&mut self.train_demapper);
        v
    }

    /// Writes `<base>.bin` and `<base>.json`.
    pub fn save(&self, base: &Path, seed: u64, steps: u64) -> Result<()> {
        let nets = [
            ("predistort", &self.predistort),
            ("combine", &self.combine),
            ("train_demapper", &self.train_demapper),
        ];
        let mut meta = BTreeMap::new();
        meta.insert("order".to_string(), self.order().to_string());
        meta.insert("window_k".to_string(), self.window_k.to_string());
        meta.insert("variant".to_string(), self.variant.to_string());
        let manifest = CheckpointManifest {
            networks: nets
                .iter()
                .map(|(name, net)| autodiff::NetworkEntry {
                    name: name.to_string(),
                    layer_sizes: net.layer_sizes(),
                    activations: net.activations().to_vec(),
                })
                .collect(),
            seed,
            steps,
            meta,
        };
        let tensors: Vec<&Tensor> = nets.iter().flat_map(|(_, n)| n.tensors()).collect();
        autodiff::save_checkpoint(base, &tensors, &manifest)
    }

    pub fn load(base: &Path) -> Result<(Self, CheckpointManifest)> {
        let (tensors, manifest) = autodiff::load_checkpoint(base)?;
        let meta = |key: &str| -> Result<&String> {
            manifest
                .meta
                .get(key)
                .ok_or_else(|| Error::Config(format!("checkpoint lacks '{key}'")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            meta(key)?
                .parse()
                .map_err(|_| Error::Config(format!("checkpoint field '{key}' is not a count")))
        };
        let order = parse_usize("order")?;
        let window_k = parse_usize("window_k")?;
        let variant: Variant = meta("variant")?.parse()?;

        let mut it = tensors.into_iter();
        let mut nets = BTreeMap::new();
        for entry in &manifest.networks {
            let mut layers = Vec::new();
            for act in &entry.activations {
                let (Some(w), Some(b)) = (it.next(), it.next()) else {
                    return Err(Error::Config("checkpoint holds too few tensors".into()));
                };
                layers.push((w, b, *act));
            }
            let net = Mlp::from_layers(layers)?;
            if net.layer_sizes() != entry.layer_sizes {
                return Err(Error::Config(format!("layer sizes of '{}' do not match", entry.name)));
            }
            nets.insert(entry.name.clone(), net);
        }
        if it.next().is_some() {
            return Err(Error::Config("checkpoint holds extra tensors".into()));
        }
        let mut take = |name: &str| {
            nets.remove(name)
                .ok_or_else(|| Error::Config(format!("checkpoint lacks network '{name}'")))
        };
        let params = Self {
            constellation: Constellation::for_order(order)?,
            predistort: take("predistort")?,
            combine: take("combine")?,
            train_demapper: take("train_demapper")?,
            window_k,
            variant,
        };
        params.validate()?;
        Ok((params, manifest))
    }
}

/// Everything a training or evaluation run needs besides the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    /// Must be a multiple of `M`: frames carry every symbol equally often.
    pub symbols_per_frame: usize,
    pub frames_per_batch: usize,
    pub steps: usize,
    pub learning_rate: f64,
    /// Learning rate at the last step; the rate decays geometrically.
    pub final_learning_rate: f64,
    pub power_dbm: f64,
    pub topology: LinkTopology,
    pub seed: u64,
    /// Switches every noise source (fiber, amplifier, front end).
    pub noise: bool,
    pub channel: ChannelKind,
}

impl TrainConfig {
    pub fn new(topology: LinkTopology, power_dbm: f64, seed: u64) -> Self {
        Self {
            symbol_rate: 20e9,
            samples_per_symbol: 4,
            symbols_per_frame: 128,
            frames_per_batch: 8,
            steps: 1500,
            learning_rate: 1e-3,
            final_learning_rate: 1e-3,
            power_dbm,
            topology,
            seed,
            noise: true,
            channel: ChannelKind::Link,
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.symbol_rate > 0.0) || self.samples_per_symbol == 0 {
            return Err(Error::invalid("symbol rate and oversampling must be positive"));
        }
        if self.symbols_per_frame == 0 || !self.symbols_per_frame.is_multiple_of(m) {
            return Err(Error::invalid(format!(
                "symbols per frame ({}) must be a positive multiple of M = {m}",
                self.symbols_per_frame
            )));
        }
        if self.frames_per_batch == 0 {
            return Err(Error::invalid("batch needs at least one frame"));
        }
        if !(self.learning_rate > 0.0) || !(self.final_learning_rate > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if !self.power_dbm.is_finite() {
            return Err(Error::invalid("launch power must be finite"));
        }
        self.topology.validate()
    }

    /// Topology with noise switched off everywhere when `noise` is false.
    pub fn effective_topology(&self) -> LinkTopology {
        let mut t = self.topology;
        if !self.noise {
            t.ssfm = SsfmConfig {
                noise_enabled: false,
                ..t.ssfm
            };
            t.edfa.nsp = 0.0;
            t.adc_noise_w = 0.0;
        }
        t
    }

    pub fn mode(&self) -> LinkMode {
        self.topology.mode
    }

    fn learning_rate_at(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.learning_rate;
        }
        let t = step as f64 / (self.steps - 1) as f64;
        self.learning_rate * (self.final_learning_rate / self.learning_rate).powf(t)
    }
}

// Stream tags keep initialization, training and evaluation draws disjoint.
const INIT_STREAM: u64 = 0x1000_0000_0000_0000;
const TRAIN_STREAM: u64 = 0x2000_0000_0000_0000;
const EVAL_STREAM: u64 = 0x3000_0000_0000_0000;
const BOOTSTRAP_STREAM: u64 = 0x4000_0000_0000_0000;

/// Seed for network initialization derived from a run seed.
pub fn init_seed(seed: u64) -> u64 {
    rng::derive_seed(seed, INIT_STREAM)
}
