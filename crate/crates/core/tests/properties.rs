use num_complex::Complex64;
use proptest::prelude::*;

use zdiv::equalizer;
use zdiv::fiber::{self, FiberSpec, SsfmConfig};
use zdiv::metrics;
use zdiv::rng;
use zdiv::signal::{self, BasebandSignal, Constellation, SamplingGrid};

fn samples(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noiseless_propagation_keeps_energy(s in samples(64), scale in 1e-3f64..0.1, len in 1usize..40) {
        let grid = SamplingGrid::raw(80e9, 64).unwrap();
        let x = BasebandSignal::new(s.iter().map(|v| v * scale).collect(), grid).unwrap();
        let f = FiberSpec::standard().noiseless();
        let y = fiber::ssfm_propagate(&x, &f, len as f64 * 5.0, &SsfmConfig::new(5.0, false), &mut rng::seeded(0)).unwrap();
        prop_assert!((y.energy() - x.energy()).abs() <= 1e-12 * x.energy().max(1e-300));
    }

    #[test]
    fn compensation_undoes_linear_propagation(s in samples(64), len in 1usize..200) {
        let grid = SamplingGrid::raw(80e9, 64).unwrap();
        let x = BasebandSignal::new(s, grid).unwrap();
        let f = FiberSpec::standard().linear_only().noiseless();
        let l = len as f64 * 5.0;
        let y = fiber::ssfm_propagate(&x, &f, l, &SsfmConfig::new(5.0, false), &mut rng::seeded(0)).unwrap();
        let z = equalizer::cdc(&y, f.beta2_ps2_per_km, l);
        let err: f64 = z.samples().iter().zip(x.samples()).map(|(a, b)| (a - b).norm_sqr()).sum();
        prop_assert!(err.sqrt() <= 1e-10 * energy(x.samples()).sqrt().max(1e-12));
    }

    #[test]
    fn brickwall_is_idempotent_and_contracts(s in samples(128), frac in 0.05f64..1.0) {
        let grid = SamplingGrid::raw(80e9, 128).unwrap();
        let x = BasebandSignal::new(s, grid).unwrap();
        let a = signal::brickwall_filter(&x, frac * 80e9).unwrap();
        let b = signal::brickwall_filter(&a, frac * 80e9).unwrap();
        prop_assert!(a.energy() <= x.energy() * (1.0 + 1e-12));
        let d: f64 = a.samples().iter().zip(b.samples()).map(|(p, q)| (p - q).norm_sqr()).sum();
        prop_assert!(d <= 1e-24 * x.energy().max(1.0));
    }

    #[test]
    fn upsample_then_downsample_recovers_symbols(s in samples(32), sps in 1usize..8) {
        let grid = SamplingGrid::new(10e9, sps, 32).unwrap();
        let f = signal::SymbolFrame::from_symbols(s.clone());
        let x = signal::upsample(&f, grid).unwrap();
        prop_assert_eq!(signal::downsample(&x, 0).unwrap().symbols, s);
    }

    #[test]
    fn information_never_exceeds_log2_m(
        spread in 0.01f64..3.0,
        m in prop::sample::select(vec![2usize, 4, 8, 16]),
        seed in any::<u64>(),
    ) {
        let c = Constellation::psk(m).unwrap();
        let mut r = rng::seeded(seed);
        let labels = rng::balanced_indices(&mut r, m, 32 * m);
        let ys: Vec<Complex64> = labels
            .iter()
            .map(|&l| c.points()[l] + rng::complex_gaussian(&mut r, spread))
            .collect();
        let g = metrics::fit_gmm(&labels, &ys, m).unwrap();
        let mi = metrics::mutual_information(&g, &labels, &ys).unwrap();
        prop_assert!(mi <= (m as f64).log2() + 1e-12);
        for y in ys.iter().take(8) {
            let p = metrics::soft_demap(&g, *y);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        }
    }

    #[test]
    fn balanced_frames_carry_each_symbol_equally(m in 1usize..32, reps in 1usize..8, seed in any::<u64>()) {
        let v = rng::balanced_indices(&mut rng::seeded(seed), m, m * reps);
        let mut counts = vec![0usize; m];
        v.iter().for_each(|&i| counts[i] += 1);
        prop_assert!(counts.iter().all(|&c| c == reps));
    }

    #[test]
    fn derived_seeds_differ_across_streams(root in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assume!(a != b);
        prop_assert_ne!(rng::derive_seed(root, a), rng::derive_seed(root, b));
    }

    #[test]
    fn bootstrap_interval_brackets_the_mean(v in prop::collection::vec(-5.0f64..5.0, 10..200), seed in any::<u64>()) {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = metrics::bootstrap_interval(&v, 200, 0.95, seed);
        prop_assert!(lo <= hi);
        prop_assert!(lo <= mean + 1e-9 && mean - 1e-9 <= hi);
    }
}
