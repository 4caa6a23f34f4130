use zdiv::experiments::{self, paired_gain, ExperimentConfig, Preset, RunRecord, Scenario};
use zdiv::link::LinkMode;
use zdiv::metrics::MetricsResult;

fn record(seed: u64, n_params: usize, power_dbm: f64, eta: f64) -> RunRecord {
    RunRecord {
        label: "aepc-sda".into(),
        mode: LinkMode::Sda,
        power_dbm,
        l2_km: 20.0,
        seed,
        n_params,
        metrics: MetricsResult {
            mi_bits: eta,
            eta,
            n_symbols: 100,
            ci_low: eta,
            ci_high: eta,
        },
        wall_s: 0.0,
    }
}

#[test]
fn pairing_requires_same_seed_params_and_power() {
    let base = record(1, 100, 5.0, 1.0);
    assert!((paired_gain(&record(1, 100, 5.0, 1.25), &base).unwrap() - 0.25).abs() < 1e-15);
    assert!(paired_gain(&record(2, 100, 5.0, 1.2), &base).is_err());
    assert!(paired_gain(&record(1, 101, 5.0, 1.2), &base).is_err());
    assert!(paired_gain(&record(1, 100, 2.5, 1.2), &base).is_err());
}

#[test]
fn text_roundtrip_preserves_config() {
    for (p, q) in [(Preset::Desk, Preset::Paper), (Preset::Paper, Preset::Desk)] {
        let a = ExperimentConfig::preset(p).unwrap();
        let mut b = ExperimentConfig::preset(q).unwrap();
        b.apply_text(&a.to_text()).unwrap();
        b.preset = a.preset.clone();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
    }
}

#[test]
fn digest_ignores_workers_and_output() {
    let a = ExperimentConfig::preset(Preset::Desk).unwrap();
    let mut b = a.clone();
    b.workers = 7;
    b.set("output.dir", "/tmp/elsewhere").unwrap();
    b.set("output.record_wall_time", "true").unwrap();
    assert_eq!(a.hash(), b.hash());
    b.set("tx.power_dbm", "1").unwrap();
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn ranges_and_lists_parse() {
    let mut c = ExperimentConfig::preset(Preset::Desk).unwrap();
    c.set("sweep.l2_km", "0:20:60").unwrap();
    assert_eq!(c.sweep.l2_km, vec![0.0, 20.0, 40.0, 60.0]);
    c.set("sweep.l2_km", "5, 10").unwrap();
    assert_eq!(c.sweep.l2_km, vec![5.0, 10.0]);
    assert!(c.set("sweep.l2_km", "0:0:10").is_err());
    assert!(c.set("tx.order", "sixteen").is_err());
}

#[test]
fn duplicate_keys_rejected() {
    let mut c = ExperimentConfig::preset(Preset::Desk).unwrap();
    assert!(c.apply_text("seed = 1\nseed = 2\n").is_err());
}

#[test]
fn presets_validate() {
    for p in [Preset::Desk, Preset::Paper] {
        ExperimentConfig::preset(p).unwrap().validate().unwrap();
    }
}

#[test]
fn resource_limits_refuse_oversized_runs() {
    let mut c = ExperimentConfig::preset(Preset::Desk).unwrap();
    c.set("limits.max_run_minutes", "0.001").unwrap();
    c.set("train.steps", "100000").unwrap();
    c.set("sweep.powers_dbm", "0").unwrap();
    c.set("sweep.l2_km", "20").unwrap();
    assert!(experiments::run_scenario(Scenario::AeL2Sweep, &c).is_err());
}

#[test]
fn ae_sweep_emits_gain_table() {
    let mut c = ExperimentConfig::preset(Preset::Desk).unwrap();
    c.apply_text(
        "workers = 1\neval.frames = 4\nlink.l1_km = 100\ntrain.steps = 2\n\
         sweep.powers_dbm = 0\nsweep.l2_km = 20, 40\nsweep.modes = sda\n",
    )
    .unwrap();
    let out = experiments::run_scenario(Scenario::AeL2Sweep, &c).unwrap();
    assert_eq!(out.rows.len(), 3);
    let (name, gains) = &out.files[0];
    assert_eq!(name, "ae-l2-sweep-gain.csv");
    assert_eq!(gains.lines().count(), 3);
    let base = out.rows.iter().find(|r| r.mode == "aepc").unwrap();
    for line in gains.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let l2: f64 = f[2].parse().unwrap();
        let g: f64 = f[4].parse().unwrap();
        let r = out.rows.iter().find(|r| r.l2_km == l2 && r.mode == "aepc-sda").unwrap();
        assert!((g - (r.eta - base.eta)).abs() < 1e-12);
    }
}
