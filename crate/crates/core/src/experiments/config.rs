//! Experiment configuration: flat `key = value` text with dotted section
//! prefixes, layered as built-in defaults, then a scale preset, then a user
//! file, then command-line overrides.
//!
//! Lists are comma separated; `start:step:stop` expands to an inclusive
//! range. `#` starts a comment.

use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::equalizer::DbpConfig;
use crate::error::{Error, Result};
use crate::fiber::{EdfaSpec, FiberSpec, SsfmConfig};
use crate::link::{LinkMode, LinkTopology};
use crate::soliton::{NormingPhase, SolitonSpec};
use crate::soliton_link::SolitonLinkConfig;
use crate::transceiver::{TrainConfig, Variant};

const DESK: &str = include_str!("../../presets/desk.conf");
const PAPER: &str = include_str!("../../presets/paper.conf");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }

    /// Text of the preset file.
    pub fn source(&self) -> &'static str {
        match self {
            Preset::Desk => DESK,
            Preset::Paper => PAPER,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "desk" => Ok(Preset::Desk),
            "paper" | "full" => Ok(Preset::Paper),
            other => Err(Error::Config(format!("unknown preset '{other}' (desk or paper)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSection {
    pub l1_km: f64,
    pub l2_km: f64,
    pub mode: LinkMode,
    pub adc_bandwidth_hz: f64,
    pub adc_noise_w: f64,
    pub step_km: f64,
    pub noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TxSection {
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    pub order: usize,
    pub symbols_per_frame: usize,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeSection {
    pub variant: Variant,
    pub window: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    pub steps: usize,
    pub frames_per_batch: usize,
    pub learning_rate: f64,
    pub final_learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub powers_dbm: Vec<f64>,
    pub l2_km: Vec<f64>,
    pub modes: Vec<LinkMode>,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbpSection {
    pub steps_per_km: f64,
    pub reduced_bandwidth_hz: f64,
    pub split_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonSection {
    pub t0_ps: f64,
    pub etas: Vec<f64>,
    pub norming: NormingPhase,
    pub sample_rate_hz: f64,
    pub slot_t0: f64,
    pub slots: usize,
    pub frames: usize,
    pub order: usize,
    pub l1_km: f64,
    pub l2_km: Vec<f64>,
    pub mode: LinkMode,
    pub step_km: f64,
    pub noise: bool,
    pub adc_bandwidth_hz: f64,
    pub adc_noise_w: f64,
    pub taps: usize,
    pub tap_spacing_ps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSection {
    pub length_km: f64,
    pub snapshots: usize,
    pub window_t0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write measured run times into the `wall_s` column. Off by default so
    /// that repeated runs give identical files.
    pub record_wall_time: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsSection {
    /// Refuse runs whose estimated memory exceeds this; 0 disables.
    pub max_memory_gb: f64,
    /// Refuse single runs whose estimated time exceeds this; 0 disables.
    pub max_run_minutes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: String,
    pub seed: u64,
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
    pub eval_frames: usize,
    pub fiber: FiberSpec,
    pub edfa: EdfaSpec,
    pub link: LinkSection,
    pub tx: TxSection,
    pub ae: AeSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub dbp: DbpSection,
    pub soliton: SolitonSection,
    pub demo: DemoSection,
    pub output: OutputSection,
    pub limits: LimitsSection,
}

/// Conversion between config text and typed values.
trait Value: Sized {
    fn parse(s: &str) -> std::result::Result<Self, String>;
    fn show(&self) -> String;
}

impl Value for f64 {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("'{s}' is not finite"))
        }
    }
    fn show(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e| format!("'{s}': {e}"))
            }
            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
from_str_value!(usize, u64, bool, String, LinkMode, Variant);

impl Value for PathBuf {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        Ok(PathBuf::from(s))
    }
    fn show(&self) -> String {
        self.display().to_string()
    }
}

impl Value for NormingPhase {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        match s {
            "colliding" => Ok(NormingPhase::Colliding),
            "alternating" => Ok(NormingPhase::Alternating),
            _ => Err(format!("'{s}' is not colliding or alternating")),
        }
    }
    fn show(&self) -> String {
        match self {
            NormingPhase::Colliding => "colliding".into(),
            NormingPhase::Alternating => "alternating".into(),
        }
    }
}

fn expand_range(item: &str) -> std::result::Result<Option<Vec<f64>>, String> {
    let parts: Vec<&str> = item.split(':').map(str::trim).collect();
    if parts.len() == 1 {
        return Ok(None);
    }
    let [a, step, b] = parts[..] else {
        return Err(format!("range '{item}' must be start:step:stop"));
    };
    let (a, step, b) = (f64::parse(a)?, f64::parse(step)?, f64::parse(b)?);
    if !(step > 0.0) || b < a {
        return Err(format!("range '{item}' needs a positive step and start <= stop"));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok(Some((0..=n).map(|k| a + k as f64 * step).collect()))
}

impl Value for Vec<f64> {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match expand_range(item)? {
                Some(r) => out.extend(r),
                None => out.push(f64::parse(item)?),
            }
        }
        Ok(out)
    }
    fn show(&self) -> String {
        self.iter().map(Value::show).collect::<Vec<_>>().join(", ")
    }
}

macro_rules! list_value {
    ($($t:ty),*) => {$(
        impl Value for Vec<$t> {
            fn parse(s: &str) -> std::result::Result<Self, String> {
                s.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(<$t as Value>::parse)
                    .collect()
            }
            fn show(&self) -> String {
                self.iter().map(Value::show).collect::<Vec<_>>().join(", ")
            }
        }
    )*};
}
list_value!(LinkMode, Variant);

macro_rules! schema {
    ($($key:literal => $($field:ident).+),* $(,)?) => {
        impl ExperimentConfig {
            /// Sets one key from its text form.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $($key => {
                        self.$($field).+ = Value::parse(value)
                            .map_err(|e| Error::Config(format!("{key}: {e}")))?;
                    })*
                    _ => return Err(Error::Config(format!("unknown key '{key}'"))),
                }
                Ok(())
            }

            /// Every key with its current value, in schema order.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$(($key, self.$($field).+.show())),*]
            }

            pub fn keys() -> &'static [&'static str] {
                &[$($key),*]
            }
        }
    };
}

schema! {
    "preset" => preset,
    "seed" => seed,
    "workers" => workers,
    "eval.frames" => eval_frames,
    "fiber.beta2_ps2_per_km" => fiber.beta2_ps2_per_km,
    "fiber.gamma" => fiber.gamma,
    "fiber.alpha_db_per_km" => fiber.alpha_db_per_km,
    "fiber.f0_hz" => fiber.f0_hz,
    "fiber.nsp" => fiber.nsp_raman,
    "edfa.gain_db" => edfa.gain_db,
    "edfa.nsp" => edfa.nsp,
    "link.l1_km" => link.l1_km,
    "link.l2_km" => link.l2_km,
    "link.mode" => link.mode,
    "link.adc_bandwidth_hz" => link.adc_bandwidth_hz,
    "link.adc_noise_w" => link.adc_noise_w,
    "link.step_km" => link.step_km,
    "link.noise" => link.noise,
    "tx.symbol_rate" => tx.symbol_rate,
    "tx.samples_per_symbol" => tx.samples_per_symbol,
    "tx.order" => tx.order,
    "tx.symbols_per_frame" => tx.symbols_per_frame,
    "tx.power_dbm" => tx.power_dbm,
    "ae.variant" => ae.variant,
    "ae.window" => ae.window,
    "ae.hidden" => ae.hidden,
    "train.steps" => train.steps,
    "train.frames_per_batch" => train.frames_per_batch,
    "train.learning_rate" => train.learning_rate,
    "train.final_learning_rate" => train.final_learning_rate,
    "sweep.powers_dbm" => sweep.powers_dbm,
    "sweep.l2_km" => sweep.l2_km,
    "sweep.modes" => sweep.modes,
    "sweep.variants" => sweep.variants,
    "dbp.steps_per_km" => dbp.steps_per_km,
    "dbp.reduced_bandwidth_hz" => dbp.reduced_bandwidth_hz,
    "dbp.split_fraction" => dbp.split_fraction,
    "soliton.t0_ps" => soliton.t0_ps,
    "soliton.etas" => soliton.etas,
    "soliton.norming" => soliton.norming,
    "soliton.sample_rate_hz" => soliton.sample_rate_hz,
    "soliton.slot_t0" => soliton.slot_t0,
    "soliton.slots" => soliton.slots,
    "soliton.frames" => soliton.frames,
    "soliton.order" => soliton.order,
    "soliton.l1_km" => soliton.l1_km,
    "soliton.l2_km" => soliton.l2_km,
    "soliton.mode" => soliton.mode,
    "soliton.step_km" => soliton.step_km,
    "soliton.noise" => soliton.noise,
    "soliton.adc_bandwidth_hz" => soliton.adc_bandwidth_hz,
    "soliton.adc_noise_w" => soliton.adc_noise_w,
    "soliton.taps" => soliton.taps,
    "soliton.tap_spacing_ps" => soliton.tap_spacing_ps,
    "demo.length_km" => demo.length_km,
    "demo.snapshots" => demo.snapshots,
    "demo.window_t0" => demo.window_t0,
    "output.dir" => output.dir,
    "output.record_wall_time" => output.record_wall_time,
    "limits.max_memory_gb" => limits.max_memory_gb,
    "limits.max_run_minutes" => limits.max_run_minutes,
}

/// Splits config text into `(line, key, value)` triples.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected 'key = value'", i + 1)));
        };
        let k = k.trim();
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(Error::Config(format!("line {}: malformed key '{k}'", i + 1)));
        }
        let v = v.trim().trim_matches('"');
        out.push((i + 1, k.to_string(), v.to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Physical constants and generic defaults shared by all presets.
    fn base() -> Self {
        Self {
            preset: String::new(),
            seed: 1,
            workers: 0,
            eval_frames: 64,
            fiber: FiberSpec::standard(),
            edfa: EdfaSpec::default(),
            link: LinkSection {
                l1_km: 1000.0,
                l2_km: 200.0,
                mode: LinkMode::Sda,
                adc_bandwidth_hz: 20e9,
                adc_noise_w: 0.0,
                step_km: 0.1,
                noise: true,
            },
            tx: TxSection {
                symbol_rate: 20e9,
                samples_per_symbol: 4,
                order: 16,
                symbols_per_frame: 128,
                power_dbm: 0.0,
            },
            ae: AeSection {
                variant: Variant::Aepc,
                window: 8,
                hidden: 64,
            },
            train: TrainSection {
                steps: 1500,
                frames_per_batch: 8,
                learning_rate: 1e-3,
                final_learning_rate: 1e-3,
            },
            sweep: SweepSection {
                powers_dbm: vec![0.0],
                l2_km: vec![20.0],
                modes: vec![LinkMode::Sd, LinkMode::Sda],
                variants: vec![Variant::Aec, Variant::Aep, Variant::Aepc],
            },
            dbp: DbpSection {
                steps_per_km: 1.0,
                reduced_bandwidth_hz: 40e9,
                split_fraction: 0.5,
            },
            soliton: SolitonSection {
                t0_ps: 50.0,
                etas: vec![0.5, 1.0],
                norming: NormingPhase::Colliding,
                sample_rate_hz: 250e9,
                slot_t0: 16.0,
                slots: 32,
                frames: 64,
                order: 16,
                l1_km: 1000.0,
                l2_km: (0..=24).map(|k| 20.0 * k as f64).collect(),
                mode: LinkMode::Sda,
                step_km: 0.5,
                noise: true,
                adc_bandwidth_hz: 5e9,
                adc_noise_w: 1e-3,
                taps: 2,
                tap_spacing_ps: 100.0,
            },
            demo: DemoSection {
                length_km: 1000.0,
                snapshots: 201,
                window_t0: 64.0,
            },
            output: OutputSection {
                dir: PathBuf::from("out"),
                record_wall_time: false,
            },
            limits: LimitsSection {
                max_memory_gb: 0.0,
                max_run_minutes: 0.0,
            },
        }
    }

    pub fn preset(p: Preset) -> Result<Self> {
        let mut c = Self::base();
        c.apply_text(p.source())?;
        c.preset = p.as_str().to_string();
        Ok(c)
    }

    /// Applies every `key = value` line of `text`; a key may appear once.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (line, k, v) in parse_pairs(text)? {
            if !seen.insert(k.clone()) {
                return Err(Error::Config(format!("line {line}: duplicate key '{k}'")));
            }
            self.set(&k, &v)
                .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Short digest of every setting that affects results. Output location,
    /// worker count and timing switches are excluded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if k == "workers" || k.starts_with("output.") || k.starts_with("limits.") {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn ssfm(&self) -> SsfmConfig {
        SsfmConfig::new(self.link.step_km, self.link.noise)
    }

    pub fn topology(&self, mode: LinkMode, l2_km: f64) -> LinkTopology {
        LinkTopology {
            mode,
            l1_km: self.link.l1_km,
            l2_km,
            adc_bandwidth_hz: self.link.adc_bandwidth_hz,
            fiber: self.fiber,
            edfa: self.edfa,
            ssfm: self.ssfm(),
            adc_noise_w: self.link.adc_noise_w,
        }
    }

    pub fn train_config(&self, mode: LinkMode, l2_km: f64, power_dbm: f64) -> TrainConfig {
        let mut c = TrainConfig::new(self.topology(mode, l2_km), power_dbm, self.seed);
        c.symbol_rate = self.tx.symbol_rate;
        c.samples_per_symbol = self.tx.samples_per_symbol;
        c.symbols_per_frame = self.tx.symbols_per_frame;
        c.frames_per_batch = self.train.frames_per_batch;
        c.steps = self.train.steps;
        c.learning_rate = self.train.learning_rate;
        c.final_learning_rate = self.train.final_learning_rate;
        c.noise = self.link.noise;
        c
    }

    pub fn dbp_full(&self) -> DbpConfig {
        DbpConfig {
            steps_per_km: self.dbp.steps_per_km,
            bandwidth_hz: None,
            split_fraction: self.dbp.split_fraction,
        }
    }

    pub fn dbp_reduced(&self) -> DbpConfig {
        DbpConfig {
            bandwidth_hz: Some(self.dbp.reduced_bandwidth_hz),
            ..self.dbp_full()
        }
    }

    pub fn soliton_spec(&self) -> SolitonSpec {
        SolitonSpec {
            t0_ps: self.soliton.t0_ps,
            etas: self.soliton.etas.clone(),
            norming: self.soliton.norming,
        }
    }

    pub fn soliton_link(&self) -> SolitonLinkConfig {
        let s = &self.soliton;
        SolitonLinkConfig {
            soliton: self.soliton_spec(),
            fiber: self.fiber,
            sample_rate: s.sample_rate_hz,
            slot_t0: s.slot_t0,
            slots_per_frame: s.slots,
            n_frames: s.frames,
            order: s.order,
            l1_km: s.l1_km,
            l2_km: s.l2_km.clone(),
            mode: s.mode,
            edfa: self.edfa,
            ssfm: SsfmConfig::new(s.step_km, s.noise),
            adc_bandwidth_hz: s.adc_bandwidth_hz,
            adc_noise_w: s.adc_noise_w,
            taps: s.taps,
            tap_spacing_ps: s.tap_spacing_ps,
            seed: self.seed,
        }
    }

    /// Cross-field checks that do not depend on the scenario.
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        if self.eval_frames < 2 {
            return Err(Error::Config("eval.frames must be at least 2".into()));
        }
        if self.sweep.powers_dbm.is_empty() {
            return Err(Error::Config("sweep.powers_dbm is empty".into()));
        }
        if self.sweep.l2_km.iter().any(|l| !(*l >= 0.0)) {
            return Err(Error::Config("sweep.l2_km must be non-negative".into()));
        }
        if self.ae.hidden == 0 {
            return Err(Error::Config("ae.hidden must be positive".into()));
        }
        self.train_config(self.link.mode, self.link.l2_km, self.tx.power_dbm)
            .validate(self.tx.order)?;
        self.dbp_full().validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_roundtrip() {
        for p in [Preset::Desk, Preset::Paper] {
            let c = ExperimentConfig::preset(p).unwrap();
            let mut d = ExperimentConfig::base();
            d.apply_text(&c.to_text()).unwrap();
            assert_eq!(c, d);
            assert_eq!(c.hash(), d.hash());
        }
    }

    #[test]
    fn every_key_is_listed_once() {
        let keys = ExperimentConfig::keys();
        let set: std::collections::BTreeSet<_> = keys.iter().collect();
        assert_eq!(set.len(), keys.len());
        assert_eq!(ExperimentConfig::base().entries().len(), keys.len());
    }

    #[test]
    fn ranges_and_lists() {
        let mut c = ExperimentConfig::base();
        c.apply_text("sweep.l2_km = 0:20:60, 100 # tail\nsweep.modes = sd,sda").unwrap();
        assert_eq!(c.sweep.l2_km, vec![0.0, 20.0, 40.0, 60.0, 100.0]);
        assert_eq!(c.sweep.modes, vec![LinkMode::Sd, LinkMode::Sda]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = ExperimentConfig::base();
        assert!(c.apply_text("link.nope = 1").is_err());
        assert!(c.apply_text("link.l1_km 12").is_err());
        assert!(c.apply_text("link.l1_km = abc").is_err());
        assert!(c.apply_text("seed = 1\nseed = 2").is_err());
        assert!(c.apply_text("sweep.l2_km = 5:0:10").is_err());
    }

    #[test]
    fn hash_ignores_output_location_only() {
        let a = ExperimentConfig::preset(Preset::Desk).unwrap();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        b.workers = 3;
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }
}
