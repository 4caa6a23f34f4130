//! FFT helpers on top of `rustfft`.
//!
//! Convention: forward DFT without scaling, inverse DFT scaled by `1/n`.
//! Plans are cached per thread.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

struct Engine {
    planner: FftPlanner<f64>,
    scratch: Vec<Complex64>,
}

thread_local! {
    static ENGINE: RefCell<Engine> = RefCell::new(Engine {
        planner: FftPlanner::new(),
        scratch: Vec::new(),
    });
}

fn run(buf: &mut [Complex64], inverse: bool) {
    if buf.is_empty() {
        return;
    }
    ENGINE.with(|e| {
        let e = &mut *e.borrow_mut();
        let plan = if inverse {
            e.planner.plan_fft_inverse(buf.len())
        } else {
            e.planner.plan_fft_forward(buf.len())
        };
        let need = plan.get_inplace_scratch_len();
        if e.scratch.len() < need {
            e.scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        plan.process_with_scratch(buf, &mut e.scratch[..need]);
    });
}

pub fn forward(buf: &mut [Complex64]) {
    run(buf, false);
}

pub fn inverse(buf: &mut [Complex64]) {
    run(buf, true);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Signed bin index of DFT bin `k` (numpy `fftfreq` ordering; for even `n`
/// bin `n/2` maps to `-n/2`).
#[inline]
pub fn signed_bin(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Frequencies in Hz of each DFT bin.
pub fn frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    (0..n)
        .map(|k| signed_bin(k, n) as f64 * sample_rate / n as f64)
        .collect()
}

/// Angular frequencies in rad/s of each DFT bin.
pub fn angular_frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    frequencies(n, sample_rate)
        .into_iter()
        .map(|f| 2.0 * PI * f)
        .collect()
}

/// Applies `y = IFFT(h .* FFT(x))` in place.
pub fn apply_transfer(buf: &mut [Complex64], h: &[Complex64]) {
    debug_assert_eq!(buf.len(), h.len());
    forward(buf);
    for (v, hk) in buf.iter_mut().zip(h) {
        *v *= hk;
    }
    inverse(buf);
}

/// Same as [`apply_transfer`] with the conjugate response (the adjoint map).
pub fn apply_transfer_adjoint(buf: &mut [Complex64], h: &[Complex64]) {
    debug_assert_eq!(buf.len(), h.len());
    forward(buf);
    for (v, hk) in buf.iter_mut().zip(h) {
        *v *= hk.conj();
    }
    inverse(buf);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let x: Vec<Complex64> = (0..12)
            .map(|k| Complex64::new(k as f64, -(k as f64) * 0.5))
            .collect();
        let mut y = x.clone();
        forward(&mut y);
        inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn bin_ordering_even_and_odd() {
        assert_eq!(
            (0..4).map(|k| signed_bin(k, 4)).collect::<Vec<_>>(),
            vec![0, 1, -2, -1]
        );
        assert_eq!(
            (0..5).map(|k| signed_bin(k, 5)).collect::<Vec<_>>(),
            vec![0, 1, 2, -2, -1]
        );
    }
}
