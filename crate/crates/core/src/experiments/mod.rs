//! Config-driven sweeps producing plot-ready CSV files.
//!
//! Runs inside a sweep execute on a worker pool and are merged in grid
//! order. Every run is a pure function of the configuration and seed, so the
//! CSV files are reproducible byte for byte; measured run times go to the
//! metadata file unless `output.record_wall_time` is set.

pub mod config;
mod runs;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{ExperimentConfig, Preset};
pub use runs::{checkpoint_base, estimate_ae_run, paired_gain, Estimate, RunRecord};

pub const CSV_HEADER: &str = "scenario,mode,power_dbm,l2_km,seed,mi_bits,eta,ci_low,ci_high,wall_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    SolitonDemo,
    SolitonL2Sweep,
    AeL2Sweep,
    AePowerSweep,
    BaselineCurves,
    Train,
    Eval,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::SolitonDemo => "soliton-demo",
            Scenario::SolitonL2Sweep => "soliton-l2-sweep",
            Scenario::AeL2Sweep => "ae-l2-sweep",
            Scenario::AePowerSweep => "ae-power-sweep",
            Scenario::BaselineCurves => "baseline-curves",
            Scenario::Train => "train",
            Scenario::Eval => "eval",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "soliton-demo" => Scenario::SolitonDemo,
            "soliton-l2-sweep" | "sweep-soliton" => Scenario::SolitonL2Sweep,
            "ae-l2-sweep" | "sweep-l2" => Scenario::AeL2Sweep,
            "ae-power-sweep" | "sweep-power" => Scenario::AePowerSweep,
            "baseline-curves" | "baselines" => Scenario::BaselineCurves,
            "train" => Scenario::Train,
            "eval" => Scenario::Eval,
            other => return Err(Error::Config(format!("unknown scenario '{other}'"))),
        })
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub scenario: String,
    /// Receiver or transceiver label, e.g. `cdc`, `aepc-sda`.
    pub mode: String,
    pub power_dbm: f64,
    pub l2_km: f64,
    pub seed: u64,
    pub mi_bits: f64,
    pub eta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub wall_s: f64,
}

impl Row {
    fn csv(&self, with_time: bool) -> String {
        let wall = if with_time { self.wall_s } else { 0.0 };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.mode,
            self.power_dbm,
            self.l2_km,
            self.seed,
            self.mi_bits,
            self.eta,
            self.ci_low,
            self.ci_high,
            wall
        )
    }
}

/// Everything a scenario produced, before it is written out.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub scenario: Scenario,
    pub rows: Vec<Row>,
    /// Additional CSV files as `(file name, contents)`.
    pub files: Vec<(String, String)>,
    /// Scenario-specific results for the metadata file and stdout.
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl ScenarioOutput {
    pub(crate) fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            rows: Vec::new(),
            files: Vec::new(),
            summary: serde_json::Map::new(),
        }
    }

    /// The results table. The first line records the configuration digest
    /// and seed shared by all rows.
    pub fn csv(&self, cfg: &ExperimentConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# scenario={} preset={} seed={} config_hash={}",
            self.scenario,
            cfg.preset,
            cfg.seed,
            cfg.hash()
        );
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv(cfg.output.record_wall_time));
            s.push('\n');
        }
        s
    }

    /// Writes `<scenario>.csv` (when there are rows), the extra files, and
    /// `<scenario>.meta.json` into `dir`. Returns the written paths.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if !self.rows.is_empty() {
            let p = dir.join(format!("{}.csv", self.scenario));
            fs::write(&p, self.csv(cfg))?;
            written.push(p);
        }
        for (name, body) in &self.files {
            let p = dir.join(name);
            fs::write(&p, body)?;
            written.push(p);
        }
        let meta = serde_json::json!({
            "scenario": self.scenario.as_str(),
            "preset": cfg.preset,
            "seed": cfg.seed,
            "config_hash": cfg.hash(),
            "budget": "training steps, frames and grids are this tool's own desk-scale choices",
            "summary": self.summary,
            "wall_s": self.rows.iter().map(|r| r.wall_s).collect::<Vec<_>>(),
            "config": cfg.to_text(),
        });
        let p = dir.join(format!("{}.meta.json", self.scenario));
        fs::write(&p, serde_json::to_string_pretty(&meta)?)?;
        written.push(p);
        Ok(written)
    }
}

/// Runs a scenario on a pool of `cfg.workers` threads.
pub fn run_scenario(scenario: Scenario, cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match scenario {
        Scenario::SolitonDemo => runs::soliton_demo(cfg),
        Scenario::SolitonL2Sweep => runs::soliton_sweep(cfg),
        Scenario::AeL2Sweep => runs::ae_l2_sweep(cfg),
        Scenario::AePowerSweep => runs::ae_power_sweep(cfg),
        Scenario::BaselineCurves => runs::baseline_curves(cfg),
        Scenario::Train => runs::train_single(cfg),
        Scenario::Eval => Err(Error::Config("eval needs a checkpoint; use run_eval".into())),
    })
}

/// Evaluates a saved transceiver under the configured link.
pub fn run_eval(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| runs::eval_checkpoint(cfg, checkpoint))
}
