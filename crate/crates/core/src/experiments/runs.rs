//! Scenario bodies.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::{ExperimentConfig, Row, Scenario, ScenarioOutput};
use crate::error::{Error, Result};
use crate::fiber::SsfmConfig;
use crate::link::LinkMode;
use crate::metrics::MetricsResult;
use crate::signal::{self, Constellation, SamplingGrid};
use crate::soliton;
use crate::soliton_link;
use crate::transceiver::{self, ClassicalReceiver, TransceiverParams, Variant};

/// Rough single-core cost of one complex FFT butterfly pass per sample, in
/// seconds; calibrated on the desk preset.
const SECONDS_PER_SAMPLE_LOG: f64 = 5e-9;
/// Live copies of a field per cached split step during training.
const CACHE_COPIES: f64 = 4.0;

/// Resource estimate for a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub memory_gb: f64,
    pub minutes: f64,
}

fn fft_cost(n: usize) -> f64 {
    n as f64 * (n as f64).log2().max(1.0)
}

/// Estimate for training and evaluating one transceiver with second fiber
/// `l2_km`, given `threads` frames in flight.
pub fn estimate_ae_run(cfg: &ExperimentConfig, l2_km: f64, threads: usize) -> Result<Estimate> {
    let ssfm = cfg.ssfm();
    let steps = (ssfm.n_steps(cfg.link.l1_km)? + ssfm.n_steps(l2_km)?) as f64;
    let n = cfg.tx.samples_per_symbol * cfg.tx.symbols_per_frame;
    let in_flight = threads.clamp(1, cfg.train.frames_per_batch.max(1)) as f64;
    let memory_gb = in_flight * steps * n as f64 * 16.0 * CACHE_COPIES / 1e9;
    let frames = (cfg.train.steps * cfg.train.frames_per_batch) as f64 * 2.0 + cfg.eval_frames as f64;
    let minutes = frames * steps * fft_cost(n) * SECONDS_PER_SAMPLE_LOG / 60.0;
    Ok(Estimate { memory_gb, minutes })
}

fn estimate_soliton_sweep(cfg: &ExperimentConfig) -> Result<Estimate> {
    let s = &cfg.soliton;
    let ssfm = SsfmConfig::new(s.step_km, s.noise);
    let last = s.l2_km.iter().cloned().fold(0.0, f64::max);
    let steps = (ssfm.n_steps(s.l1_km)? + ssfm.n_steps(last).unwrap_or(0)) as f64;
    let n = (s.slot_t0 * s.t0_ps * 1e-12 * s.sample_rate_hz).round() as usize * s.slots;
    // each frame keeps taps only, plus a few working copies of the field
    let memory_gb = 8.0 * n as f64 * 16.0 * rayon::current_num_threads() as f64 / 1e9;
    let minutes = s.frames as f64 * steps * fft_cost(n) * SECONDS_PER_SAMPLE_LOG / 60.0;
    Ok(Estimate { memory_gb, minutes })
}

fn check(cfg: &ExperimentConfig, what: &str, e: Estimate) -> Result<()> {
    let l = &cfg.limits;
    if l.max_memory_gb > 0.0 && e.memory_gb > l.max_memory_gb {
        return Err(Error::Config(format!(
            "{what}: estimated memory {:.2} GB exceeds limits.max_memory_gb = {}",
            e.memory_gb, l.max_memory_gb
        )));
    }
    if l.max_run_minutes > 0.0 && e.minutes > l.max_run_minutes {
        return Err(Error::Config(format!(
            "{what}: estimated {:.1} min per run exceeds limits.max_run_minutes = {}",
            e.minutes, l.max_run_minutes
        )));
    }
    Ok(())
}

fn row(scenario: Scenario, mode: String, power_dbm: f64, l2_km: f64, seed: u64, r: &MetricsResult, wall_s: f64) -> Row {
    Row {
        scenario: scenario.as_str().to_string(),
        mode,
        power_dbm,
        l2_km,
        seed,
        mi_bits: r.mi_bits,
        eta: r.eta,
        ci_low: r.ci_low,
        ci_high: r.ci_high,
        wall_s,
    }
}

/// Spectral breathing of the configured soliton without noise, with the
/// share of energy inside the receiver band at every distance.
pub(super) fn soliton_demo(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let start = Instant::now();
    let s = &cfg.soliton;
    let spec = cfg.soliton_spec();
    let n = (cfg.demo.window_t0 * s.t0_ps * 1e-12 * s.sample_rate_hz).round() as usize;
    let grid = SamplingGrid::raw(s.sample_rate_hz, n)?;
    let pulse = if spec.etas.len() == 2 {
        soliton::two_soliton_from_eigenvalues(&spec, &cfg.fiber, grid)?
    } else {
        let center = n as f64 / s.sample_rate_hz / 2.0 * 1e12;
        soliton::sech_soliton(spec.etas[0] * 2.0, spec.t0_ps, &cfg.fiber, grid, center)?
    };
    let ssfm = SsfmConfig::new(s.step_km, false);
    let evo = soliton::spectral_evolution(&pulse, &cfg.fiber, cfg.demo.length_km, &ssfm, cfg.demo.snapshots)?;

    let mut out = ScenarioOutput::new(Scenario::SolitonDemo);
    let mut heat = Vec::new();
    evo.write_csv(&mut heat)?;
    out.files.push((
        "soliton-demo-heatmap.csv".into(),
        String::from_utf8(heat).map_err(|e| Error::Numerical(e.to_string()))?,
    ));
    let frac = evo.in_band_fraction(s.adc_bandwidth_hz);
    let mut band = String::from("z_km,in_band_fraction\n");
    for (z, f) in evo.z_km.iter().zip(&frac) {
        let _ = writeln!(band, "{z},{f}");
    }
    out.files.push(("soliton-demo-in-band.csv".into(), band));

    let measured = evo.recurrence_period().ok();
    let predicted = if spec.etas.len() == 2 {
        soliton::soliton_period(&spec, &cfg.fiber).ok()
    } else {
        None
    };
    let (lo, hi) = frac
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    out.summary.insert("measured_period_km".into(), json!(measured));
    out.summary.insert("predicted_period_km".into(), json!(predicted));
    out.summary.insert("in_band_min".into(), json!(lo));
    out.summary.insert("in_band_max".into(), json!(hi));
    out.summary.insert("wall_s".into(), json!(start.elapsed().as_secs_f64()));
    Ok(out)
}

pub(super) fn soliton_sweep(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    check(cfg, "soliton sweep", estimate_soliton_sweep(cfg)?)?;
    let start = Instant::now();
    let link = cfg.soliton_link();
    let sweep = soliton_link::soliton_l2_sweep(&link)?;
    let wall = start.elapsed().as_secs_f64();

    // average launch power of a frame; PSK keeps it symbol independent
    let ones = vec![num_complex::Complex64::new(1.0, 0.0); link.slots_per_frame];
    let launch_dbm = signal::measure_power(&soliton_link::soliton_frame(&link, &ones)?).dbm;

    let mut out = ScenarioOutput::new(Scenario::SolitonL2Sweep);
    for p in &sweep.points {
        out.rows.push(row(
            Scenario::SolitonL2Sweep,
            link.mode.to_string(),
            launch_dbm,
            p.l2_km,
            cfg.seed,
            &p.metrics,
            wall,
        ));
    }
    let period = soliton::soliton_period(&link.soliton, &link.fiber)?;
    if let Some(best) = sweep.argmax() {
        out.summary.insert("argmax_l2_km".into(), json!(best.l2_km));
        out.summary.insert("argmax_mi_bits".into(), json!(best.metrics.mi_bits));
        out.summary.insert("argmax_over_period".into(), json!(best.l2_km / period));
    }
    out.summary.insert("first_mi_bits".into(), json!(sweep.points[0].metrics.mi_bits));
    out.summary.insert("period_km".into(), json!(period));
    Ok(out)
}

/// A trained and evaluated transceiver, with what pairing needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub mode: LinkMode,
    pub power_dbm: f64,
    pub l2_km: f64,
    pub seed: u64,
    pub n_params: usize,
    pub metrics: MetricsResult,
    pub wall_s: f64,
}

/// `eta(run) - eta(reference)`, refused unless both runs share seed,
/// launch power and parameter count.
pub fn paired_gain(run: &RunRecord, reference: &RunRecord) -> Result<f64> {
    if run.seed != reference.seed {
        return Err(Error::Config(format!(
            "refusing to pair runs with seeds {} and {}",
            run.seed, reference.seed
        )));
    }
    if run.n_params != reference.n_params {
        return Err(Error::Config(format!(
            "refusing to pair runs with {} and {} trainable parameters",
            run.n_params, reference.n_params
        )));
    }
    if run.power_dbm != reference.power_dbm {
        return Err(Error::Config("refusing to pair runs at different launch powers".into()));
    }
    Ok(run.metrics.eta - reference.metrics.eta)
}

fn label(variant: Variant, mode: LinkMode) -> String {
    match mode {
        LinkMode::Baseline => variant.to_string(),
        m => format!("{variant}-{m}"),
    }
}

#[derive(Debug, Clone, Copy)]
struct AeJob {
    variant: Variant,
    mode: LinkMode,
    power_dbm: f64,
    l2_km: f64,
}

fn run_ae(cfg: &ExperimentConfig, job: AeJob) -> Result<RunRecord> {
    let start = Instant::now();
    let tc = cfg.train_config(job.mode, job.l2_km, job.power_dbm);
    let params = TransceiverParams::new(
        cfg.tx.order,
        cfg.ae.window,
        cfg.ae.hidden,
        job.variant,
        transceiver::init_seed(cfg.seed),
    )?;
    let trained = transceiver::train(&tc, params)?;
    let metrics = transceiver::evaluate(&trained.params, &tc, cfg.eval_frames)?;
    Ok(RunRecord {
        label: label(job.variant, job.mode),
        mode: job.mode,
        power_dbm: job.power_dbm,
        l2_km: job.l2_km,
        seed: cfg.seed,
        n_params: trained.params.n_params(),
        metrics,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

fn run_jobs(cfg: &ExperimentConfig, jobs: &[AeJob]) -> Result<Vec<RunRecord>> {
    let threads = rayon::current_num_threads();
    for j in jobs {
        check(cfg, &label(j.variant, j.mode), estimate_ae_run(cfg, j.l2_km, threads)?)?;
    }
    jobs.par_iter().map(|j| run_ae(cfg, *j)).collect()
}

fn record_row(scenario: Scenario, r: &RunRecord) -> Row {
    row(scenario, r.label.clone(), r.power_dbm, r.l2_km, r.seed, &r.metrics, r.wall_s)
}

/// For every power: the duplicated baseline and each diversity mode at each
/// second-fiber length, then the paired gains.
pub(super) fn ae_l2_sweep(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let variant = cfg.ae.variant;
    if !variant.combines() {
        return Err(Error::Config(format!(
            "{variant} has no receiver combiner, so a second observation cannot help"
        )));
    }
    let mut jobs = Vec::new();
    for &p in &cfg.sweep.powers_dbm {
        jobs.push(AeJob {
            variant,
            mode: LinkMode::Baseline,
            power_dbm: p,
            l2_km: 0.0,
        });
        for &mode in cfg.sweep.modes.iter().filter(|m| **m != LinkMode::Baseline) {
            for &l2 in &cfg.sweep.l2_km {
                jobs.push(AeJob {
                    variant,
                    mode,
                    power_dbm: p,
                    l2_km: l2,
                });
            }
        }
    }
    let records = run_jobs(cfg, &jobs)?;
    let mut out = ScenarioOutput::new(Scenario::AeL2Sweep);
    out.rows = records.iter().map(|r| record_row(Scenario::AeL2Sweep, r)).collect();

    let mut gains = String::from("mode,power_dbm,l2_km,seed,delta_eta\n");
    let mut best = serde_json::Map::new();
    for &p in &cfg.sweep.powers_dbm {
        let base = records
            .iter()
            .find(|r| r.mode == LinkMode::Baseline && r.power_dbm == p)
            .ok_or_else(|| Error::InsufficientData("missing baseline run".into()))?;
        for r in records.iter().filter(|r| r.mode != LinkMode::Baseline && r.power_dbm == p) {
            let g = paired_gain(r, base)?;
            let _ = writeln!(gains, "{},{},{},{},{}", r.label, p, r.l2_km, r.seed, g);
            let key = format!("{}@{}dBm", r.label, p);
            let better = best
                .get(&key)
                .and_then(|v| v.get("delta_eta"))
                .and_then(|v| v.as_f64())
                .is_none_or(|b| g > b);
            if better {
                best.insert(key, json!({"l2_km": r.l2_km, "delta_eta": g}));
            }
        }
    }
    out.files.push(("ae-l2-sweep-gain.csv".into(), gains));
    out.summary.insert("best_gain".into(), serde_json::Value::Object(best));
    Ok(out)
}

enum Entry {
    Classical {
        name: &'static str,
        rx: ClassicalReceiver,
        power_dbm: f64,
    },
    Learned(AeJob),
}

fn classical_entries(cfg: &ExperimentConfig) -> [(&'static str, ClassicalReceiver); 3] {
    [
        ("cdc", ClassicalReceiver::Cdc),
        ("dbp-full", ClassicalReceiver::SplitDbp(cfg.dbp_full())),
        ("dbp-reduced", ClassicalReceiver::SplitDbp(cfg.dbp_reduced())),
    ]
}

fn push_classical(cfg: &ExperimentConfig, entries: &mut Vec<Entry>, power_dbm: f64) {
    for (name, rx) in classical_entries(cfg) {
        entries.push(Entry::Classical { name, rx, power_dbm });
    }
}

fn run_entries(cfg: &ExperimentConfig, scenario: Scenario, entries: &[Entry]) -> Result<ScenarioOutput> {
    let threads = rayon::current_num_threads();
    for e in entries {
        if let Entry::Learned(j) = e {
            check(cfg, &label(j.variant, j.mode), estimate_ae_run(cfg, j.l2_km, threads)?)?;
        }
    }
    let constellation = Constellation::for_order(cfg.tx.order)?;
    let rows = entries
        .par_iter()
        .map(|e| match e {
            Entry::Classical { name, rx, power_dbm } => {
                let start = Instant::now();
                let tc = cfg.train_config(LinkMode::Baseline, 0.0, *power_dbm);
                let r = transceiver::evaluate_classical(&tc, &constellation, rx, cfg.eval_frames)?;
                let wall = start.elapsed().as_secs_f64();
                Ok(row(scenario, name.to_string(), *power_dbm, 0.0, cfg.seed, &r, wall))
            }
            Entry::Learned(j) => run_ae(cfg, *j).map(|r| record_row(scenario, &r)),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = ScenarioOutput::new(scenario);
    out.rows = rows;
    Ok(out)
}

/// Every receiver family over the power grid: the classical references,
/// and each learned variant alone and with the diversity modes at
/// `link.l2_km`. Variants without a receiver combiner only run alone.
pub(super) fn ae_power_sweep(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let mut entries = Vec::new();
    for &p in &cfg.sweep.powers_dbm {
        push_classical(cfg, &mut entries, p);
        for &variant in &cfg.sweep.variants {
            let mut modes = vec![LinkMode::Baseline];
            if variant.combines() {
                modes.extend(cfg.sweep.modes.iter().filter(|m| **m != LinkMode::Baseline));
            }
            for mode in modes {
                entries.push(Entry::Learned(AeJob {
                    variant,
                    mode,
                    power_dbm: p,
                    l2_km: if mode == LinkMode::Baseline { 0.0 } else { cfg.link.l2_km },
                }));
            }
        }
    }
    run_entries(cfg, Scenario::AePowerSweep, &entries)
}

/// Classical receivers only, over the power grid.
pub(super) fn baseline_curves(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let mut entries = Vec::new();
    for &p in &cfg.sweep.powers_dbm {
        push_classical(cfg, &mut entries, p);
    }
    run_entries(cfg, Scenario::BaselineCurves, &entries)
}

/// Trains `ae.variant` on the configured link and power, saves the
/// checkpoint and the loss history, and reports held-out performance.
pub(super) fn train_single(cfg: &ExperimentConfig) -> Result<ScenarioOutput> {
    let l2 = if cfg.link.mode == LinkMode::Baseline { 0.0 } else { cfg.link.l2_km };
    check(cfg, "train", estimate_ae_run(cfg, l2, rayon::current_num_threads())?)?;
    let start = Instant::now();
    let tc = cfg.train_config(cfg.link.mode, l2, cfg.tx.power_dbm);
    let params = TransceiverParams::new(
        cfg.tx.order,
        cfg.ae.window,
        cfg.ae.hidden,
        cfg.ae.variant,
        transceiver::init_seed(cfg.seed),
    )?;
    let trained = transceiver::train(&tc, params)?;
    let metrics = transceiver::evaluate(&trained.params, &tc, cfg.eval_frames)?;
    fs_save(cfg, &trained.params)?;

    let mut out = ScenarioOutput::new(Scenario::Train);
    out.rows.push(row(
        Scenario::Train,
        label(cfg.ae.variant, cfg.link.mode),
        cfg.tx.power_dbm,
        l2,
        cfg.seed,
        &metrics,
        start.elapsed().as_secs_f64(),
    ));
    let mut losses = String::from("step,loss\n");
    for (i, l) in trained.losses.iter().enumerate() {
        let _ = writeln!(losses, "{i},{l}");
    }
    out.files.push(("train-loss.csv".into(), losses));
    out.summary.insert("checkpoint".into(), json!(checkpoint_base(cfg).display().to_string()));
    out.summary.insert("n_params".into(), json!(trained.params.n_params()));
    Ok(out)
}

/// Where `train` stores its checkpoint: `<output.dir>/checkpoint`.
pub fn checkpoint_base(cfg: &ExperimentConfig) -> std::path::PathBuf {
    cfg.output.dir.join("checkpoint")
}

fn fs_save(cfg: &ExperimentConfig, params: &TransceiverParams) -> Result<()> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    params.save(&checkpoint_base(cfg), cfg.seed, cfg.train.steps as u64)
}

pub(super) fn eval_checkpoint(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<ScenarioOutput> {
    let start = Instant::now();
    let (params, _) = TransceiverParams::load(checkpoint)?;
    if params.order() != cfg.tx.order {
        return Err(Error::Config(format!(
            "checkpoint is for M = {}, configuration says {}",
            params.order(),
            cfg.tx.order
        )));
    }
    let l2 = if cfg.link.mode == LinkMode::Baseline { 0.0 } else { cfg.link.l2_km };
    let tc = cfg.train_config(cfg.link.mode, l2, cfg.tx.power_dbm);
    let metrics = transceiver::evaluate(&params, &tc, cfg.eval_frames)?;
    let mut out = ScenarioOutput::new(Scenario::Eval);
    out.rows.push(row(
        Scenario::Eval,
        label(params.variant, cfg.link.mode),
        cfg.tx.power_dbm,
        l2,
        cfg.seed,
        &metrics,
        start.elapsed().as_secs_f64(),
    ));
    Ok(out)
}
