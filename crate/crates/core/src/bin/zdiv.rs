//! Command-line front end for the experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use zdiv::experiments::{self, ExperimentConfig, Preset, Scenario};
use zdiv::Error;

#[derive(Parser, Debug)]
#[command(name = "zdiv", version, about = "Nonlinear fiber diversity experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Config file applied on top of the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "desk")]
    preset: String,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepKind {
    Ae,
    Soliton,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral breathing heatmap and in-band energy of the soliton.
    SolitonDemo,
    /// Information rate versus second-fiber length.
    SweepL2 {
        #[arg(long, value_enum, default_value = "ae")]
        kind: SweepKind,
    },
    /// Every receiver family over the launch-power grid.
    SweepPower,
    /// Dispersion compensation and split backpropagation curves.
    Baselines,
    /// Trains one transceiver and saves a checkpoint.
    Train,
    /// Evaluates a saved transceiver.
    Eval {
        /// Checkpoint base path (without extension); defaults to the one
        /// `train` writes.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Prints the resolved configuration.
    Config,
}

fn resolve(c: &Common) -> zdiv::Result<ExperimentConfig> {
    let preset: Preset = c.preset.parse()?;
    let mut cfg = ExperimentConfig::preset(preset)?;
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for o in &c.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> zdiv::Result<serde_json::Value> {
    let cfg = resolve(&cli.common)?;
    let out = match cli.command {
        Command::Config => {
            print!("{}", cfg.to_text());
            return Ok(json!(null));
        }
        Command::SolitonDemo => experiments::run_scenario(Scenario::SolitonDemo, &cfg)?,
        Command::SweepL2 { kind: SweepKind::Ae } => experiments::run_scenario(Scenario::AeL2Sweep, &cfg)?,
        Command::SweepL2 { kind: SweepKind::Soliton } => {
            experiments::run_scenario(Scenario::SolitonL2Sweep, &cfg)?
        }
        Command::SweepPower => experiments::run_scenario(Scenario::AePowerSweep, &cfg)?,
        Command::Baselines => experiments::run_scenario(Scenario::BaselineCurves, &cfg)?,
        Command::Train => experiments::run_scenario(Scenario::Train, &cfg)?,
        Command::Eval { checkpoint } => {
            let ck = checkpoint.unwrap_or_else(|| experiments::checkpoint_base(&cfg));
            experiments::run_eval(&cfg, &ck)?
        }
    };
    let files = out.write(&cfg, &cfg.output.dir)?;
    Ok(json!({
        "scenario": out.scenario.as_str(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "rows": out.rows,
        "summary": out.summary,
    }))
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.to_string().trim().to_string(), 2);
        }
    };
    match run(cli) {
        Ok(serde_json::Value::Null) => ExitCode::SUCCESS,
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string(), 1),
    }
}
