//! Sampled complex baseband signals and the shared DSP vocabulary: symbol
//! mapping, zero-stuffing resamplers, ideal band-limiting and power
//! normalization.
//!
//! Frames are circularly periodic throughout. All filters act on the DFT of
//! the whole frame, so they introduce no delay and no edge transients.

use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

/// Uniform sampling grid shared by a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingGrid {
    sample_rate: f64,
    symbol_rate: f64,
    samples_per_symbol: usize,
    n_samples: usize,
}

impl SamplingGrid {
    /// Builds a grid for `n_symbols` symbols at `symbol_rate` with
    /// `samples_per_symbol` samples each.
    pub fn new(symbol_rate: f64, samples_per_symbol: usize, n_symbols: usize) -> Result<Self> {
        if !(symbol_rate > 0.0) || !symbol_rate.is_finite() {
            return Err(Error::invalid("symbol rate must be positive"));
        }
        if samples_per_symbol == 0 {
            return Err(Error::invalid("samples per symbol must be at least 1"));
        }
        if n_symbols == 0 {
            return Err(Error::invalid("frame needs at least one symbol"));
        }
        Ok(Self {
            sample_rate: symbol_rate * samples_per_symbol as f64,
            symbol_rate,
            samples_per_symbol,
            n_samples: n_symbols * samples_per_symbol,
        })
    }

    /// A grid with one "symbol" per sample, for signals with no symbol
    /// structure (e.g. read back from a container).
    pub fn raw(sample_rate: f64, n_samples: usize) -> Result<Self> {
        Self::new(sample_rate, 1, n_samples)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
    pub fn symbol_rate(&self) -> f64 {
        self.symbol_rate
    }
    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
    pub fn n_symbols(&self) -> usize {
        self.n_samples / self.samples_per_symbol
    }
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Same symbol structure at `samples_per_symbol / factor` samples per
    /// symbol.
    pub fn decimated(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.samples_per_symbol.is_multiple_of(factor) {
            return Err(Error::invalid(format!(
                "decimation factor {factor} does not divide {} samples per symbol",
                self.samples_per_symbol
            )));
        }
        Self::new(
            self.symbol_rate,
            self.samples_per_symbol / factor,
            self.n_symbols(),
        )
    }

    pub fn interpolated(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("interpolation factor must be positive"));
        }
        Self::new(
            self.symbol_rate,
            self.samples_per_symbol * factor,
            self.n_symbols(),
        )
    }
}

/// Complex envelope `q(t, z)` sampled on a [`SamplingGrid`], in sqrt(W).
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    samples: Vec<Complex64>,
    grid: SamplingGrid,
    /// Propagated distance in km.
    pub z_km: f64,
}

impl BasebandSignal {
    pub fn new(samples: Vec<Complex64>, grid: SamplingGrid) -> Result<Self> {
        if samples.len() != grid.n_samples() {
            return Err(Error::DimensionMismatch {
                context: "signal samples vs grid",
                expected: grid.n_samples(),
                got: samples.len(),
            });
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::Numerical("signal contains non-finite samples".into()));
        }
        Ok(Self {
            samples,
            grid,
            z_km: 0.0,
        })
    }

    pub fn zeros(grid: SamplingGrid) -> Self {
        Self {
            samples: vec![Complex64::new(0.0, 0.0); grid.n_samples()],
            grid,
            z_km: 0.0,
        }
    }

    pub(crate) fn from_parts(samples: Vec<Complex64>, grid: SamplingGrid, z_km: f64) -> Self {
        debug_assert_eq!(samples.len(), grid.n_samples());
        Self {
            samples,
            grid,
            z_km,
        }
    }

    pub fn with_z(mut self, z_km: f64) -> Self {
        self.z_km = z_km;
        self
    }

    /// Copy multiplied by a real factor.
    pub fn scaled(&self, k: f64) -> Self {
        Self::from_parts(self.samples.iter().map(|v| v * k).collect(), self.grid, self.z_km)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
    pub(crate) fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }
    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }
    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of |q|^2 over samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Physical energy in joules (sum |q|^2 dt).
    pub fn energy_joules(&self) -> f64 {
        self.energy() * self.grid.dt()
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.samples.clone();
        fft::forward(&mut buf);
        buf
    }

    /// Re-labels the sampling grid. The sample rate and length must agree.
    pub fn regrid(mut self, grid: SamplingGrid) -> Result<Self> {
        if grid.n_samples() != self.samples.len()
            || (grid.sample_rate() - self.grid.sample_rate()).abs()
                > 1e-9 * self.grid.sample_rate()
        {
            return Err(Error::invalid("new grid does not match sample rate and length"));
        }
        self.grid = grid;
        Ok(self)
    }

    pub(crate) fn ensure_finite(&self, context: &str) -> Result<()> {
        if self
            .samples
            .iter()
            .any(|s| !s.re.is_finite() || !s.im.is_finite())
        {
            return Err(Error::Numerical(format!("non-finite samples after {context}")));
        }
        Ok(())
    }

    /// Serializes to the binary container: little-endian header
    /// `sample_rate: f64, n_samples: u64, z_km: f64`, then interleaved
    /// `re, im` pairs as f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.grid.sample_rate().to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        w.write_all(&self.z_km.to_le_bytes())?;
        for s in &self.samples {
            w.write_all(&s.re.to_le_bytes())?;
            w.write_all(&s.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary container. The symbol structure is not stored, so the
    /// result has a raw grid (one sample per symbol); use [`Self::regrid`].
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let sample_rate = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let z_km = f64::from_le_bytes(b8);
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            samples.push(Complex64::new(re, im));
        }
        let grid = SamplingGrid::raw(sample_rate, n)?;
        Ok(Self::new(samples, grid)?.with_z(z_km))
    }

    /// CSV export with columns `index,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,re,im")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(w, "{k},{:e},{:e}", s.re, s.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, grid: SamplingGrid) -> Result<Self> {
        let mut samples = Vec::new();
        for (ln, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if ln == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::invalid(format!("csv line {}: expected 3 columns", ln + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("csv line {}: {e}", ln + 1)))
            };
            samples.push(Complex64::new(parse(cols[1])?, parse(cols[2])?));
        }
        Self::new(samples, grid)
    }
}

/// Fixed symbol alphabet with unit mean power.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
}

impl Constellation {
    /// Normalizes `points` to unit mean power. Points must be distinct and
    /// not all zero.
    pub fn from_points(points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("constellation needs at least one point"));
        }
        let p = points.iter().map(|c| c.norm_sqr()).sum::<f64>() / points.len() as f64;
        if !(p > 0.0) {
            return Err(Error::invalid("constellation has zero power"));
        }
        let s = 1.0 / p.sqrt();
        let points: Vec<Complex64> = points.into_iter().map(|c| c * s).collect();
        for i in 0..points.len() {
            for j in 0..i {
                if (points[i] - points[j]).norm() < 1e-12 {
                    return Err(Error::invalid("constellation points must be distinct"));
                }
            }
        }
        Ok(Self { points })
    }

    /// M-PSK on the unit circle, first point at +1.
    pub fn psk(m: usize) -> Result<Self> {
        let pts = (0..m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / m as f64))
            .collect();
        Self::from_points(pts)
    }

    /// Multi-ring layout: `rings` concentric rings with `phases` points each.
    /// Ring `i` has radius proportional to `sqrt((i + 0.5) / rings)`, so
    /// ring energies are evenly spaced, and is rotated by `i * pi / phases`
    /// relative to ring 0.
    pub fn rings(rings: usize, phases: usize) -> Result<Self> {
        if rings == 0 || phases == 0 {
            return Err(Error::invalid("rings and phases must be positive"));
        }
        let mut pts = Vec::with_capacity(rings * phases);
        for i in 0..rings {
            let r = ((i as f64 + 0.5) / rings as f64).sqrt();
            let offset = i as f64 * std::f64::consts::PI / phases as f64;
            for k in 0..phases {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / phases as f64 + offset;
                pts.push(Complex64::from_polar(r, phi));
            }
        }
        Self::from_points(pts)
    }

    /// Square ring layout for `m` a perfect square (16 -> 4x4, 256 -> 16x16).
    pub fn for_order(m: usize) -> Result<Self> {
        let side = (m as f64).sqrt().round() as usize;
        if side * side != m {
            return Err(Error::invalid(format!("M = {m} is not a perfect square")));
        }
        Self::rings(side, side)
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }
    pub fn order(&self) -> usize {
        self.points.len()
    }
    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

/// Symbol-rate frame. `indices` is empty for frames recovered at a receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub indices: Vec<usize>,
    pub symbols: Vec<Complex64>,
}

impl SymbolFrame {
    pub fn from_symbols(symbols: Vec<Complex64>) -> Self {
        Self {
            indices: Vec::new(),
            symbols,
        }
    }
    pub fn len(&self) -> usize {
        self.symbols.len()
    }
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

pub fn map_symbols(indices: &[usize], c: &Constellation) -> Result<SymbolFrame> {
    let m = c.order();
    let mut symbols = Vec::with_capacity(indices.len());
    for &i in indices {
        if i >= m {
            return Err(Error::invalid(format!("symbol index {i} out of range [0, {m})")));
        }
        symbols.push(c.points[i]);
    }
    Ok(SymbolFrame {
        indices: indices.to_vec(),
        symbols,
    })
}

/// Zero-stuffing 1:sps upsampler; symbol `k` lands on sample `k * sps`.
pub fn upsample(frame: &SymbolFrame, grid: SamplingGrid) -> Result<BasebandSignal> {
    if frame.len() != grid.n_symbols() {
        return Err(Error::DimensionMismatch {
            context: "upsample frame length",
            expected: grid.n_symbols(),
            got: frame.len(),
        });
    }
    let sps = grid.samples_per_symbol();
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n_samples()];
    for (k, s) in frame.symbols.iter().enumerate() {
        out[k * sps] = *s;
    }
    BasebandSignal::new(out, grid)
}

/// `sps:1` decimation keeping samples `phase + k * sps`.
pub fn downsample(x: &BasebandSignal, phase: usize) -> Result<SymbolFrame> {
    let sps = x.grid().samples_per_symbol();
    if phase >= sps {
        return Err(Error::invalid(format!(
            "downsampling phase {phase} outside [0, {sps})"
        )));
    }
    Ok(SymbolFrame::from_symbols(
        x.samples().iter().skip(phase).step_by(sps).copied().collect(),
    ))
}

/// 0/1 response of an ideal lowpass of total width `bandwidth`: keeps bins
/// with `-B/2 <= f < B/2`.
pub fn brickwall_response(n: usize, sample_rate: f64, bandwidth: f64) -> Vec<Complex64> {
    let half_bins = bandwidth * n as f64 / sample_rate / 2.0;
    let eps = 1e-9;
    (0..n)
        .map(|k| {
            let b = fft::signed_bin(k, n) as f64;
            if b >= -half_bins - eps && b < half_bins - eps {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

pub(crate) fn check_bandwidth(bandwidth: f64, sample_rate: f64) -> Result<()> {
    if !(bandwidth > 0.0) || bandwidth > sample_rate * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "filter bandwidth {bandwidth:e} Hz outside (0, {sample_rate:e}]"
        )));
    }
    Ok(())
}

/// Ideal brickwall lowpass of total passband width `bandwidth` Hz.
pub fn brickwall_filter(x: &BasebandSignal, bandwidth: f64) -> Result<BasebandSignal> {
    let fs = x.grid().sample_rate();
    check_bandwidth(bandwidth, fs)?;
    let h = brickwall_response(x.len(), fs, bandwidth);
    let mut buf = x.samples().to_vec();
    fft::apply_transfer(&mut buf, &h);
    Ok(BasebandSignal::from_parts(buf, *x.grid(), x.z_km))
}

/// Scales `x` so that its mean sample power equals `p_avg` watts.
pub fn normalize_power(x: &BasebandSignal, p_avg: f64) -> Result<BasebandSignal> {
    let e = x.energy();
    if !(e > 0.0) {
        return Err(Error::invalid("cannot normalize an all-zero signal"));
    }
    if !(p_avg >= 0.0) {
        return Err(Error::invalid("target power must be non-negative"));
    }
    let s = (p_avg * x.len() as f64 / e).sqrt();
    let samples = x.samples().iter().map(|v| v * s).collect();
    Ok(BasebandSignal::from_parts(samples, *x.grid(), x.z_km))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerReading {
    pub watts: f64,
    /// `-inf` for an all-zero signal.
    pub dbm: f64,
}

pub fn measure_power(x: &BasebandSignal) -> PowerReading {
    let watts = if x.is_empty() {
        0.0
    } else {
        x.energy() / x.len() as f64
    };
    PowerReading {
        watts,
        dbm: watts_to_dbm(watts),
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    if w > 0.0 {
        10.0 * (w / 1e-3).log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Band-limits to the new Nyquist band and keeps every `factor`-th sample.
/// Exact for signals already confined to the lower rate's band.
pub fn decimate(x: &BasebandSignal, factor: usize) -> Result<BasebandSignal> {
    let grid = x.grid().decimated(factor)?;
    if factor == 1 {
        return Ok(x.clone());
    }
    let filtered = brickwall_filter(x, grid.sample_rate())?;
    let samples = filtered.samples().iter().step_by(factor).copied().collect();
    Ok(BasebandSignal::from_parts(samples, grid, x.z_km))
}

/// Band-limited interpolation by an integer factor (spectral zero padding).
pub fn interpolate(x: &BasebandSignal, factor: usize) -> Result<BasebandSignal> {
    let grid = x.grid().interpolated(factor)?;
    if factor == 1 {
        return Ok(x.clone());
    }
    let n = x.len();
    let m = grid.n_samples();
    let spec = x.spectrum();
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (k, v) in spec.iter().enumerate() {
        let b = fft::signed_bin(k, n);
        let idx = if b >= 0 { b as usize } else { (m as i64 + b) as usize };
        out[idx] = *v * factor as f64;
    }
    fft::inverse(&mut out);
    Ok(BasebandSignal::from_parts(out, grid, x.z_km))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_signal(grid: SamplingGrid, seed: u64) -> BasebandSignal {
        let mut r = rng::seeded(seed);
        let s = (0..grid.n_samples())
            .map(|_| rng::complex_gaussian(&mut r, 1.0))
            .collect();
        BasebandSignal::new(s, grid).unwrap()
    }

    fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    #[test]
    fn grid_invariants() {
        let g = SamplingGrid::new(20e9, 16, 8).unwrap();
        assert_eq!(g.sample_rate(), 320e9);
        assert_eq!(g.n_samples(), 128);
        assert!(SamplingGrid::new(20e9, 0, 8).is_err());
        assert!(g.decimated(3).is_err());
        assert_eq!(g.decimated(8).unwrap().samples_per_symbol(), 2);
    }

    #[test]
    fn mapping_examples() {
        let bpsk = Constellation::psk(2).unwrap();
        let f = map_symbols(&[0, 1], &bpsk).unwrap();
        assert!((f.symbols[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((f.symbols[1] - c(-1.0, 0.0)).norm() < 1e-15);

        let ring = Constellation::for_order(256).unwrap();
        let f = map_symbols(&[0, 0], &ring).unwrap();
        assert_eq!(f.symbols, vec![ring.points()[0]; 2]);
        assert!(map_symbols(&[256], &ring).is_err());
    }

    #[test]
    fn ring_constellation_power_and_random_frame() {
        let ring = Constellation::for_order(256).unwrap();
        assert!((ring.mean_power() - 1.0).abs() < 1e-12);
        let mut r = rng::seeded(5);
        let idx = rng::uniform_indices(&mut r, 256, 10_000);
        let f = map_symbols(&idx, &ring).unwrap();
        let p = f.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / f.len() as f64;
        assert!((p - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn duplicate_points_rejected() {
        assert!(Constellation::from_points(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn upsample_examples() {
        let g = SamplingGrid::new(1.0, 2, 1).unwrap();
        let x = upsample(&SymbolFrame::from_symbols(vec![c(1.0, 0.0)]), g).unwrap();
        assert_eq!(x.samples(), &[c(1.0, 0.0), c(0.0, 0.0)]);

        let g = SamplingGrid::new(1.0, 3, 2).unwrap();
        let x = upsample(&SymbolFrame::from_symbols(vec![c(1.0, 0.0), c(0.0, 1.0)]), g).unwrap();
        let z = c(0.0, 0.0);
        assert_eq!(x.samples(), &[c(1.0, 0.0), z, z, c(0.0, 1.0), z, z]);

        let f = downsample(&x, 0).unwrap();
        assert_eq!(f.symbols, vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let f = downsample(&x, 1).unwrap();
        assert_eq!(f.symbols, vec![z, z]);
        assert!(downsample(&x, 3).is_err());
    }

    #[test]
    fn brickwall_tone_rejection_and_range() {
        let g = SamplingGrid::raw(100.0, 100).unwrap();
        let s = (0..100)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 0.4 * k as f64))
            .collect();
        let x = BasebandSignal::new(s, g).unwrap();
        let y = brickwall_filter(&x, 20.0).unwrap();
        assert!(y.energy() < 1e-20);
        assert!(brickwall_filter(&x, 101.0).is_err());
        assert!(brickwall_filter(&x, 0.0).is_err());
        let full = brickwall_filter(&x, 100.0).unwrap();
        assert!((full.energy() - x.energy()).abs() < 1e-9);
    }

    #[test]
    fn brickwall_idempotent_and_self_adjoint() {
        let g = SamplingGrid::new(10.0, 8, 16).unwrap();
        let x = random_signal(g, 1);
        let y = random_signal(g, 2);
        let fx = brickwall_filter(&x, 10.0).unwrap();
        let ffx = brickwall_filter(&fx, 10.0).unwrap();
        for (a, b) in fx.samples().iter().zip(ffx.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
        let fy = brickwall_filter(&y, 10.0).unwrap();
        let lhs = inner(fx.samples(), y.samples());
        let rhs = inner(x.samples(), fy.samples());
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-12);
    }

    #[test]
    fn roll_off_zero_shaping_reconstructs_symbols() {
        let g = SamplingGrid::new(20e9, 16, 64).unwrap();
        let mut r = rng::seeded(9);
        let s: Vec<Complex64> = (0..64).map(|_| rng::complex_gaussian(&mut r, 1.0)).collect();
        let x = upsample(&SymbolFrame::from_symbols(s.clone()), g).unwrap();
        let shaped = brickwall_filter(&x, 20e9).unwrap();
        let back = downsample(&shaped, 0).unwrap();
        // fixed gain 1/sps of roll-off-0 shaping
        let err: f64 = back
            .symbols
            .iter()
            .zip(&s)
            .map(|(a, b)| (a * 16.0 - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let norm: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-10, "{}", err / norm);
    }

    #[test]
    fn normalize_examples() {
        let g = SamplingGrid::raw(1.0, 2).unwrap();
        let x = BasebandSignal::new(vec![c(1.0, 0.0), c(1.0, 0.0)], g).unwrap();
        let y = normalize_power(&x, 1.0).unwrap();
        assert_eq!(y.samples(), x.samples());
        let x = BasebandSignal::new(vec![c(2.0, 0.0), c(0.0, 0.0)], g).unwrap();
        let y = normalize_power(&x, 1.0).unwrap();
        assert!((y.samples()[0].re - 2f64.sqrt()).abs() < 1e-15);
        assert!(normalize_power(&BasebandSignal::zeros(g), 1.0).is_err());
    }

    #[test]
    fn measure_examples() {
        let g = SamplingGrid::raw(1.0, 4).unwrap();
        let x = BasebandSignal::new(vec![c(1.0, 0.0); 4], g).unwrap();
        let p = measure_power(&x);
        assert_eq!(p.watts, 1.0);
        assert!((p.dbm - 30.0).abs() < 1e-12);
        let z = measure_power(&BasebandSignal::zeros(g));
        assert_eq!(z.watts, 0.0);
        assert_eq!(z.dbm, f64::NEG_INFINITY);

        let g = SamplingGrid::new(1.0, 4, 32).unwrap();
        let x = random_signal(g, 4);
        let y = normalize_power(&x, dbm_to_watts(-5.0)).unwrap();
        assert!((measure_power(&y).watts - 3.16227766e-4).abs() < 1e-12);
        let y = normalize_power(&x, 1e-3).unwrap();
        assert!((measure_power(&y).watts - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn decimate_then_interpolate_is_exact_for_band_limited() {
        let g = SamplingGrid::new(1.0, 8, 16).unwrap();
        let x = brickwall_filter(&random_signal(g, 3), 2.0).unwrap();
        let d = decimate(&x, 4).unwrap();
        assert_eq!(d.grid().samples_per_symbol(), 2);
        let u = interpolate(&d, 4).unwrap();
        for (a, b) in x.samples().iter().zip(u.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn binary_container_layout() {
        let g = SamplingGrid::raw(2.0, 2).unwrap();
        let x = BasebandSignal::new(vec![c(1.0, -1.0), c(0.5, 0.25)], g)
            .unwrap()
            .with_z(3.0);
        let mut buf = Vec::new();
        x.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 32);
        assert_eq!(&buf[0..8], &2.0f64.to_le_bytes());
        assert_eq!(&buf[8..16], &2u64.to_le_bytes());
        assert_eq!(&buf[16..24], &3.0f64.to_le_bytes());
        assert_eq!(&buf[24..32], &1.0f64.to_le_bytes());
        assert_eq!(&buf[32..40], &(-1.0f64).to_le_bytes());
        let back = BasebandSignal::read_binary(&buf[..]).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn csv_header() {
        let g = SamplingGrid::raw(1.0, 1).unwrap();
        let x = BasebandSignal::new(vec![c(0.5, 2.0)], g).unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("index,re,im\n0,"));
        let back = BasebandSignal::read_csv(s.as_bytes(), g).unwrap();
        assert_eq!(back.samples(), x.samples());
    }
}
