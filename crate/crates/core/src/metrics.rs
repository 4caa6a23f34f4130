//! Soft-decision metrics: a class-conditional Gaussian demapper and the
//! mismatched-decoding mutual information it certifies.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Minimum number of observations per class for a fit.
pub const MIN_PER_CLASS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian2 {
    pub mean: [f64; 2],
    /// Symmetric covariance `[[xx, xy], [xy, yy]]`.
    pub cov: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    log_norm: f64,
}

impl Gaussian2 {
    fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::Numerical("class covariance is not positive definite".into()));
        }
        let inv = [
            [cov[1][1] / det, -cov[0][1] / det],
            [-cov[1][0] / det, cov[0][0] / det],
        ];
        let log_norm = -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln();
        Ok(Self {
            mean,
            cov,
            inv,
            log_norm,
        })
    }

    pub fn log_density(&self, y: Complex64) -> f64 {
        let d = [y.re - self.mean[0], y.im - self.mean[1]];
        let q = d[0] * (self.inv[0][0] * d[0] + self.inv[0][1] * d[1])
            + d[1] * (self.inv[1][0] * d[0] + self.inv[1][1] * d[1]);
        self.log_norm - 0.5 * q
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let [[a, b], [_, d]] = self.cov;
        let tr = a + d;
        let disc = ((a - d) * (a - d) / 4.0 + b * b).sqrt();
        tr / 2.0 - disc
    }
}

/// One Gaussian per class with uniform priors.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub classes: Vec<Gaussian2>,
    /// Diagonal loading added to every class covariance.
    pub regularization: f64,
}

impl GmmModel {
    pub fn order(&self) -> usize {
        self.classes.len()
    }

    pub fn prior(&self) -> f64 {
        1.0 / self.classes.len() as f64
    }

    fn log_likelihoods(&self, y: Complex64) -> Vec<f64> {
        self.classes.iter().map(|g| g.log_density(y)).collect()
    }
}

/// Maximum-likelihood fit of one Gaussian per class with diagonal loading of
/// `1e-8` times the mean class variance.
pub fn fit_gmm(labels: &[usize], ys: &[Complex64], m: usize) -> Result<GmmModel> {
    if labels.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            context: "labels vs observations",
            expected: labels.len(),
            got: ys.len(),
        });
    }
    if m == 0 {
        return Err(Error::invalid("model needs at least one class"));
    }
    let mut count = vec![0usize; m];
    let mut sum = vec![[0.0f64; 2]; m];
    for (&l, y) in labels.iter().zip(ys) {
        if l >= m {
            return Err(Error::invalid(format!("label {l} out of range [0, {m})")));
        }
        count[l] += 1;
        sum[l][0] += y.re;
        sum[l][1] += y.im;
    }
    if let Some(c) = count.iter().position(|&c| c < MIN_PER_CLASS) {
        return Err(Error::InsufficientData(format!(
            "class {c} observed {} times, need at least {MIN_PER_CLASS}",
            count[c]
        )));
    }
    let means: Vec<[f64; 2]> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| [s[0] / c as f64, s[1] / c as f64])
        .collect();
    let mut covs = vec![[[0.0f64; 2]; 2]; m];
    for (&l, y) in labels.iter().zip(ys) {
        let d = [y.re - means[l][0], y.im - means[l][1]];
        let c = &mut covs[l];
        c[0][0] += d[0] * d[0];
        c[0][1] += d[0] * d[1];
        c[1][1] += d[1] * d[1];
    }
    for (c, &n) in covs.iter_mut().zip(&count) {
        let n = n as f64;
        c[0][0] /= n;
        c[0][1] /= n;
        c[1][1] /= n;
        c[1][0] = c[0][1];
    }
    let mean_var = covs.iter().map(|c| (c[0][0] + c[1][1]) / 2.0).sum::<f64>() / m as f64;
    let scale = means
        .iter()
        .map(|mu| mu[0] * mu[0] + mu[1] * mu[1])
        .sum::<f64>()
        / m as f64;
    // a noiseless channel has zero spread; fall back to a tiny fraction of
    // the signal scale so densities stay finite
    let reg = (1e-8 * mean_var).max(1e-20 * scale).max(1e-300);
    let classes = means
        .into_iter()
        .zip(covs)
        .map(|(mu, mut c)| {
            c[0][0] += reg;
            c[1][1] += reg;
            Gaussian2::new(mu, c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GmmModel {
        classes,
        regularization: reg,
    })
}

fn log_posteriors(g: &GmmModel, y: Complex64) -> Vec<f64> {
    let ll = g.log_likelihoods(y);
    let mx = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + ll.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
    ll.into_iter().map(|v| v - lse).collect()
}

/// Posterior over classes for a received symbol.
pub fn soft_demap(g: &GmmModel, y: Complex64) -> Vec<f64> {
    log_posteriors(g, y).into_iter().map(f64::exp).collect()
}

/// `log2 p(label | y) + log2 M` per observation.
pub fn information_terms(g: &GmmModel, labels: &[usize], ys: &[Complex64]) -> Vec<f64> {
    let log2m = (g.order() as f64).log2();
    labels
        .iter()
        .zip(ys)
        .map(|(&l, &y)| log_posteriors(g, y)[l] / std::f64::consts::LN_2 + log2m)
        .collect()
}

/// Mismatched-decoding mutual information in bit/symbol, clipped at zero.
pub fn mutual_information(g: &GmmModel, labels: &[usize], ys: &[Complex64]) -> Result<f64> {
    if labels.is_empty() || labels.len() != ys.len() {
        return Err(Error::invalid("mutual information needs matching, non-empty inputs"));
    }
    if labels.iter().any(|&l| l >= g.order()) {
        return Err(Error::invalid("label outside the model's classes"));
    }
    let terms = information_terms(g, labels, ys);
    let mi = (terms.iter().sum::<f64>() / terms.len() as f64).max(0.0);
    check_bound(mi, g.order())?;
    Ok(mi)
}

fn check_bound(mi: f64, m: usize) -> Result<()> {
    let cap = (m as f64).log2();
    if mi > cap + 1e-12 {
        return Err(Error::Numerical(format!("information {mi} exceeds log2 M = {cap}")));
    }
    Ok(())
}

/// `mi * R_S / B_occupied` in bit/(s Hz).
pub fn spectral_efficiency(mi_bits: f64, symbol_rate: f64, occupied_bandwidth: f64) -> Result<f64> {
    if !(occupied_bandwidth > 0.0) {
        return Err(Error::invalid("occupied bandwidth must be positive"));
    }
    Ok(mi_bits * symbol_rate / occupied_bandwidth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsResult {
    pub mi_bits: f64,
    pub eta: f64,
    pub n_symbols: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Labelled receiver outputs grouped in equal-length frames.
#[derive(Debug, Clone, Default)]
pub struct Observations {
    pub labels: Vec<usize>,
    pub symbols: Vec<Complex64>,
    pub frame_len: usize,
}

impl Observations {
    pub fn new(frame_len: usize) -> Self {
        Self {
            labels: Vec::new(),
            symbols: Vec::new(),
            frame_len,
        }
    }

    pub fn push_frame(&mut self, labels: &[usize], symbols: &[Complex64]) -> Result<()> {
        if labels.len() != self.frame_len || symbols.len() != self.frame_len {
            return Err(Error::DimensionMismatch {
                context: "observation frame",
                expected: self.frame_len,
                got: labels.len().min(symbols.len()),
            });
        }
        self.labels.extend_from_slice(labels);
        self.symbols.extend_from_slice(symbols);
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        self.labels.len().checked_div(self.frame_len).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub symbol_rate: f64,
    pub occupied_bandwidth: f64,
    pub bootstrap_resamples: usize,
    /// Two-sided confidence level of the bootstrap interval.
    pub confidence: f64,
    pub seed: u64,
}

impl EvalSettings {
    pub fn new(symbol_rate: f64, seed: u64) -> Self {
        Self {
            symbol_rate,
            occupied_bandwidth: symbol_rate,
            bootstrap_resamples: 200,
            confidence: 0.95,
            seed,
        }
    }
}

/// Fits the demapper on the first half of the frames and scores the second
/// half; the interval comes from a frame-level bootstrap of the scored half.
pub fn evaluate_observations(obs: &Observations, m: usize, s: &EvalSettings) -> Result<MetricsResult> {
    let nf = obs.n_frames();
    if nf < 2 {
        return Err(Error::InsufficientData("need at least two frames".into()));
    }
    let split = (nf / 2) * obs.frame_len;
    let model = fit_gmm(&obs.labels[..split], &obs.symbols[..split], m)?;
    let terms = information_terms(&model, &obs.labels[split..], &obs.symbols[split..]);
    let frame_means: Vec<f64> = terms
        .chunks(obs.frame_len)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let mi = (frame_means.iter().sum::<f64>() / frame_means.len() as f64).max(0.0);
    check_bound(mi, m)?;
    let (lo, hi) = bootstrap_interval(&frame_means, s.bootstrap_resamples, s.confidence, s.seed);
    let eta = spectral_efficiency(mi, s.symbol_rate, s.occupied_bandwidth)?;
    let k = s.symbol_rate / s.occupied_bandwidth;
    Ok(MetricsResult {
        mi_bits: mi,
        eta,
        n_symbols: terms.len(),
        ci_low: lo.max(0.0) * k,
        ci_high: hi.max(0.0) * k,
    })
}

/// Percentile bootstrap interval of the mean of `values`.
pub fn bootstrap_interval(values: &[f64], resamples: usize, confidence: f64, seed: u64) -> (f64, f64) {
    let n = values.len();
    if n == 0 || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut r = rng::seeded(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[r.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    let idx = |q: f64| ((q * (resamples - 1) as f64).round() as usize).min(resamples - 1);
    (means[idx(tail)], means[idx(1.0 - tail)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn noiseless_two_classes() {
        let labels: Vec<usize> = (0..20).map(|k| k % 2).collect();
        let ys: Vec<Complex64> = labels.iter().map(|&l| c(if l == 0 { 1.0 } else { -1.0 }, 0.0)).collect();
        let g = fit_gmm(&labels, &ys, 2).unwrap();
        assert_eq!(g.classes[0].mean, [1.0, 0.0]);
        assert_eq!(g.classes[1].mean, [-1.0, 0.0]);
        assert!(g.classes[0].cov[0][0] <= 1e-18);
        assert!(g.classes[0].min_eigenvalue() >= g.regularization * 0.999);
        let p = soft_demap(&g, c(1.0, 0.0));
        assert!(p[0] > 0.999);
    }

    #[test]
    fn equidistant_point_between_mirrored_classes() {
        let offsets = [c(0.1, 0.0), c(-0.1, 0.0), c(0.0, 0.1), c(0.0, -0.1)];
        let mut labels = Vec::new();
        let mut ys = Vec::new();
        for k in 0..16 {
            let d = offsets[k % 4];
            labels.extend([0, 1]);
            ys.extend([c(1.0, 0.0) + d, c(-1.0, 0.0) + d]);
        }
        let g = fit_gmm(&labels, &ys, 2).unwrap();
        let mid = soft_demap(&g, c(0.0, 0.3));
        assert!((mid[0] - 0.5).abs() < 1e-12, "{mid:?}");
    }

    #[test]
    fn unobserved_class_rejected() {
        let labels = vec![0usize; 16];
        let ys = vec![c(0.0, 0.0); 16];
        assert!(matches!(fit_gmm(&labels, &ys, 2), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn covariance_estimate() {
        let mut r = rng::seeded(8);
        let n = 10_000;
        let ys: Vec<Complex64> = (0..n).map(|_| rng::complex_gaussian(&mut r, 0.1)).collect();
        let g = fit_gmm(&vec![0; n], &ys, 1).unwrap();
        let cov = g.classes[0].cov;
        assert!((cov[0][0] - 0.05).abs() < 0.005);
        assert!((cov[1][1] - 0.05).abs() < 0.005);
    }

    #[test]
    fn identical_classes_give_uniform_posterior() {
        let labels: Vec<usize> = (0..40).map(|k| k % 4).collect();
        let mut r = rng::seeded(1);
        let base: Vec<Complex64> = (0..10).map(|_| rng::complex_gaussian(&mut r, 1.0)).collect();
        let ys: Vec<Complex64> = (0..40).map(|k| base[k / 4]).collect();
        let g = fit_gmm(&labels, &ys, 4).unwrap();
        for p in soft_demap(&g, c(0.3, -0.2)) {
            assert!((p - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn efficiency_ratio() {
        assert_eq!(spectral_efficiency(7.5, 20e9, 20e9).unwrap(), 7.5);
        assert_eq!(spectral_efficiency(4.0, 10.0, 20.0).unwrap(), 2.0);
        assert_eq!(spectral_efficiency(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(spectral_efficiency(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bootstrap_brackets_mean() {
        let v: Vec<f64> = (0..50).map(|k| (k % 7) as f64).collect();
        let m = v.iter().sum::<f64>() / 50.0;
        let (lo, hi) = bootstrap_interval(&v, 300, 0.95, 3);
        assert!(lo < m && m < hi);
    }
}
