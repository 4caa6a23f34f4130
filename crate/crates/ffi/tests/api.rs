use std::ffi::{CStr, CString};
use std::ptr;

use zdiv_ffi::*;

fn last_error() -> String {
    let p = zdiv_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn gaussian_pulse(n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = (i as f64 - n as f64 / 2.0) / 20.0;
        v.push(0.01 * (-t * t).exp());
        v.push(0.0);
    }
    v
}

#[test]
fn signal_roundtrip() {
    let raw = gaussian_pulse(256);
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(zdiv_signal_new(raw.as_ptr(), 256, 100e9, &mut s), ZdivStatus::Ok);
        assert_eq!(zdiv_signal_len(s), 256);
        let mut back = vec![0.0; 512];
        assert_eq!(zdiv_signal_read(s, back.as_mut_ptr(), back.len()), ZdivStatus::Ok);
        assert_eq!(back, raw);
        let mut small = vec![0.0; 10];
        assert_eq!(zdiv_signal_read(s, small.as_mut_ptr(), 10), ZdivStatus::BufferTooSmall);
        assert!(last_error().contains("need 512"));
        zdiv_signal_free(s);
    }
}

#[test]
fn null_handles_are_reported() {
    unsafe {
        assert_eq!(zdiv_signal_new(ptr::null(), 4, 1e9, ptr::null_mut()), ZdivStatus::NullPointer);
        let mut s = ptr::null_mut();
        assert_eq!(zdiv_signal_new(ptr::null(), 4, 1e9, &mut s), ZdivStatus::NullPointer);
        assert!(s.is_null());
        assert_eq!(zdiv_signal_len(ptr::null()), 0);
        zdiv_signal_free(ptr::null_mut());
        zdiv_config_free(ptr::null_mut());
        zdiv_result_free(ptr::null_mut());
        assert!(zdiv_result_csv(ptr::null()).is_null());
    }
}

#[test]
fn propagation_then_compensation_is_identity_without_kerr() {
    let raw = gaussian_pulse(512);
    let mut fiber = zdiv_fiber_standard();
    fiber.gamma = 0.0;
    let (mut x, mut y, mut z) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(zdiv_signal_new(raw.as_ptr(), 512, 100e9, &mut x), ZdivStatus::Ok);
        assert_eq!(zdiv_ssfm_propagate(x, fiber, 50.0, 1.0, 0, 7, &mut y), ZdivStatus::Ok);
        assert_eq!(zdiv_cdc(y, fiber.beta2_ps2_per_km, 50.0, &mut z), ZdivStatus::Ok);
        let mut mid = vec![0.0; 1024];
        let mut out = vec![0.0; 1024];
        zdiv_signal_read(y, mid.as_mut_ptr(), 1024);
        zdiv_signal_read(z, out.as_mut_ptr(), 1024);
        let moved: f64 = mid.iter().zip(&raw).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let err: f64 = out.iter().zip(&raw).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(moved > 1e-4);
        assert!(err < 1e-12, "{err}");
        for h in [x, y, z] {
            zdiv_signal_free(h);
        }
    }
}

#[test]
fn bad_step_maps_to_invalid_argument() {
    let raw = gaussian_pulse(64);
    let (mut x, mut y) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        zdiv_signal_new(raw.as_ptr(), 64, 100e9, &mut x);
        let st = zdiv_ssfm_propagate(x, zdiv_fiber_standard(), 10.0, -1.0, 0, 0, &mut y);
        assert_eq!(st, ZdivStatus::InvalidArgument);
        assert!(y.is_null());
        assert!(!last_error().is_empty());
        zdiv_signal_free(x);
    }
}

#[test]
fn noise_variance_scales_with_length_and_bandwidth() {
    let f = zdiv_fiber_standard();
    let a = zdiv_ase_sigma2(f, 1.0, 10e9);
    assert!(a > 0.0);
    assert!((zdiv_ase_sigma2(f, 2.0, 10e9) / a - 2.0).abs() < 1e-12);
    assert!((zdiv_ase_sigma2(f, 1.0, 20e9) / a - 2.0).abs() < 1e-12);
}

#[test]
fn separable_points_carry_full_information() {
    let pts = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    let mut labels = Vec::new();
    let mut ys = Vec::new();
    for i in 0..400u32 {
        let k = (i % 4) as usize;
        let d = 1e-3 * ((i as f64) * 0.37).sin();
        labels.push(k as u32);
        ys.push(pts[k].0 + d);
        ys.push(pts[k].1 - d);
    }
    let mut mi = 0.0;
    unsafe {
        let st = zdiv_mutual_information(labels.as_ptr(), ys.as_ptr(), labels.len(), 4, &mut mi);
        assert_eq!(st, ZdivStatus::Ok, "{}", last_error());
    }
    assert!((mi - 2.0).abs() < 1e-6, "{mi}");
}

#[test]
fn config_set_hash_and_errors() {
    let desk = CString::new("desk").unwrap();
    let mut c = ptr::null_mut();
    let mut h1 = [0 as std::ffi::c_char; 64];
    let mut h2 = [0 as std::ffi::c_char; 64];
    unsafe {
        assert_eq!(zdiv_config_new(desk.as_ptr(), &mut c), ZdivStatus::Ok);
        assert_eq!(zdiv_config_hash(c, h1.as_mut_ptr(), 64), ZdivStatus::Ok);
        let k = CString::new("seed").unwrap();
        let v = CString::new("99").unwrap();
        assert_eq!(zdiv_config_set(c, k.as_ptr(), v.as_ptr()), ZdivStatus::Ok);
        assert_eq!(zdiv_config_hash(c, h2.as_mut_ptr(), 64), ZdivStatus::Ok);
        assert_ne!(CStr::from_ptr(h1.as_ptr()), CStr::from_ptr(h2.as_ptr()));
        assert_eq!(zdiv_config_hash(c, h2.as_mut_ptr(), 3), ZdivStatus::BufferTooSmall);

        let bad = CString::new("no.such.key").unwrap();
        assert_eq!(zdiv_config_set(c, bad.as_ptr(), v.as_ptr()), ZdivStatus::Config);
        let dup = CString::new("seed = 1\nseed = 2\n").unwrap();
        assert_eq!(zdiv_config_apply(c, dup.as_ptr()), ZdivStatus::Config);
        zdiv_config_free(c);

        let nope = CString::new("huge").unwrap();
        let mut d = ptr::null_mut();
        assert_eq!(zdiv_config_new(nope.as_ptr(), &mut d), ZdivStatus::Config);
        assert!(d.is_null());
    }
}

#[test]
fn tiny_baseline_scenario_returns_csv() {
    let desk = CString::new("desk").unwrap();
    let mut c = ptr::null_mut();
    unsafe {
        zdiv_config_new(desk.as_ptr(), &mut c);
        let text = CString::new(
            "workers = 1\neval.frames = 4\ntx.symbols_per_frame = 64\nlink.l1_km = 100\nsweep.powers_dbm = 0\n",
        )
        .unwrap();
        assert_eq!(zdiv_config_apply(c, text.as_ptr()), ZdivStatus::Ok, "{}", last_error());
        let name = CString::new("baselines").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(zdiv_run_scenario(c, name.as_ptr(), &mut r), ZdivStatus::Ok, "{}", last_error());
        let csv = CStr::from_ptr(zdiv_result_csv(r)).to_str().unwrap().to_owned();
        assert!(csv.starts_with("# scenario=baseline-curves"));
        assert_eq!(csv.lines().count(), 2 + zdiv_result_rows(r));
        assert!(zdiv_result_rows(r) >= 3);
        zdiv_result_free(r);

        let unknown = CString::new("warp-drive").unwrap();
        let mut r2 = ptr::null_mut();
        assert_eq!(zdiv_run_scenario(c, unknown.as_ptr(), &mut r2), ZdivStatus::Config);
        zdiv_config_free(c);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let h = include_str!("../include/zdiv.h");
    for f in [
        "zdiv_last_error",
        "zdiv_version",
        "zdiv_fiber_standard",
        "zdiv_ase_sigma2",
        "zdiv_signal_new",
        "zdiv_signal_free",
        "zdiv_signal_len",
        "zdiv_signal_read",
        "zdiv_ssfm_propagate",
        "zdiv_cdc",
        "zdiv_mutual_information",
        "zdiv_config_new",
        "zdiv_config_apply",
        "zdiv_config_set",
        "zdiv_config_hash",
        "zdiv_config_free",
        "zdiv_run_scenario",
        "zdiv_result_csv",
        "zdiv_result_rows",
        "zdiv_result_free",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    let v = unsafe { CStr::from_ptr(zdiv_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
