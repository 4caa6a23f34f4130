//! Discrete eigenvalues of the Zakharov-Shabat scattering problem
//! `v' = [[-j l, u], [-conj(u), j l]] v` for a sampled, normalized profile.
//!
//! The profile is treated as piecewise constant on the sampling cells; each
//! cell contributes an exact 2x2 matrix exponential, so the scattering
//! coefficient `a(l)` carries an `O(dt^2)` discretization error. Zeros of
//! `a` in the upper half plane are isolated with the argument principle on
//! recursively split rectangles and polished with Newton iterations.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Normalized potential on a uniform grid.
#[derive(Debug, Clone)]
pub struct ScatteringProblem {
    u: Vec<Complex64>,
    dtau: f64,
}

impl ScatteringProblem {
    /// `u[k]` is the potential on the `k`-th cell of width `dtau`. Leading and
    /// trailing samples below `1e-12` of the peak are dropped; the eigenvalues
    /// do not depend on the time origin.
    pub fn new(u: &[Complex64], dtau: f64) -> Result<Self> {
        if !(dtau > 0.0) {
            return Err(Error::invalid("cell width must be positive"));
        }
        let peak = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return Ok(Self {
                u: Vec::new(),
                dtau,
            });
        }
        let thr = 1e-12 * peak;
        let first = u.iter().position(|v| v.norm() > thr).unwrap_or(0);
        let last = u.iter().rposition(|v| v.norm() > thr).unwrap_or(0);
        Ok(Self {
            u: u[first..=last].to_vec(),
            dtau,
        })
    }

    pub fn energy(&self) -> f64 {
        self.u.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dtau
    }

    /// Scattering coefficient `a(l)` for `Im l > 0`.
    pub fn a(&self, lambda: Complex64) -> Complex64 {
        let mut v1 = Complex64::new(1.0, 0.0);
        let mut v2 = Complex64::new(0.0, 0.0);
        let mut log_scale = 0.0;
        let h = self.dtau;
        let l2 = lambda * lambda;
        for &q in &self.u {
            let k2 = -l2 - q.norm_sqr();
            let k = k2.sqrt();
            let kh = k * h;
            let (ch, sh_over_k) = if kh.norm() < 1e-4 {
                let kh2 = kh * kh;
                (
                    1.0 + kh2 / 2.0 + kh2 * kh2 / 24.0,
                    h * (1.0 + kh2 / 6.0 + kh2 * kh2 / 120.0),
                )
            } else {
                (kh.cosh(), kh.sinh() / k)
            };
            let a11 = ch - J * lambda * sh_over_k;
            let a12 = q * sh_over_k;
            let a21 = -q.conj() * sh_over_k;
            let a22 = ch + J * lambda * sh_over_k;
            let n1 = a11 * v1 + a12 * v2;
            let n2 = a21 * v1 + a22 * v2;
            let s = n1.norm().max(n2.norm());
            if s > 1e100 || (s < 1e-100 && s > 0.0) {
                v1 = n1 / s;
                v2 = n2 / s;
                log_scale += s.ln();
            } else {
                v1 = n1;
                v2 = n2;
            }
        }
        let width = self.u.len() as f64 * h;
        // initial condition exp(-j l tau) (1, 0), read out as v1 exp(j l tau_end)
        let phase = J * lambda * width;
        v1 * (phase + log_scale).exp()
    }

    /// Discrete eigenvalues with `Im l > min_imag`, sorted by imaginary part.
    pub fn eigenvalues(&self, min_imag: f64) -> Vec<Complex64> {
        if self.u.is_empty() {
            return Vec::new();
        }
        // trace formula: sum of 4 Im(l) over eigenvalues is at most the energy
        let im_max = self.energy() / 4.0 * 1.05 + 0.05;
        if im_max <= min_imag {
            return Vec::new();
        }
        let re_max = self.real_extent();
        let mut roots = Vec::new();
        let rect = Rect {
            x0: -re_max,
            x1: re_max * 1.013,
            y0: min_imag,
            y1: im_max,
        };
        self.search(rect, 0, &mut roots);
        roots.sort_by(|a, b| a.im.total_cmp(&b.im));
        // merge duplicates found in neighbouring rectangles
        let mut out: Vec<Complex64> = Vec::new();
        for r in roots {
            if !out.iter().any(|o| (o - r).norm() < 1e-7) {
                out.push(r);
            }
        }
        out
    }

    /// Half-width of the real-axis search range: half the normalized angular
    /// frequency holding 99.99% of the energy, padded.
    fn real_extent(&self) -> f64 {
        let n = self.u.len().next_power_of_two() * 2;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..self.u.len()].copy_from_slice(&self.u);
        fft::forward(&mut buf);
        let total: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
        let mut bins: Vec<(f64, f64)> = buf
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let w = 2.0 * std::f64::consts::PI * fft::signed_bin(k, n) as f64
                    / (n as f64 * self.dtau);
                (w.abs(), v.norm_sqr())
            })
            .collect();
        bins.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let mut w99 = 0.0;
        for (w, p) in bins {
            acc += p;
            w99 = w;
            if acc >= 0.9999 * total {
                break;
            }
        }
        w99 / 2.0 + 1.0
    }

    fn winding(&self, r: &Rect) -> Option<i64> {
        let corners = [
            Complex64::new(r.x0, r.y0),
            Complex64::new(r.x1, r.y0),
            Complex64::new(r.x1, r.y1),
            Complex64::new(r.x0, r.y1),
        ];
        let mut total = 0.0;
        for e in 0..4 {
            let p0 = corners[e];
            let p1 = corners[(e + 1) % 4];
            let pts = 24;
            let mut prev_z = p0;
            let mut prev = self.a(p0);
            for i in 1..=pts {
                let z = p0 + (p1 - p0) * (i as f64 / pts as f64);
                let val = self.a(z);
                total += self.arg_increment(prev_z, prev, z, val, 0)?;
                prev_z = z;
                prev = val;
            }
        }
        Some((total / (2.0 * std::f64::consts::PI)).round() as i64)
    }

    fn arg_increment(
        &self,
        z0: Complex64,
        f0: Complex64,
        z1: Complex64,
        f1: Complex64,
        depth: u32,
    ) -> Option<f64> {
        if f0.norm() < 1e-300 || f1.norm() < 1e-300 {
            return None;
        }
        let d = (f1 / f0).arg();
        if d.abs() < 0.5 || depth > 30 {
            return Some(d);
        }
        let zm = (z0 + z1) * 0.5;
        let fm = self.a(zm);
        Some(
            self.arg_increment(z0, f0, zm, fm, depth + 1)?
                + self.arg_increment(zm, fm, z1, f1, depth + 1)?,
        )
    }

    fn search(&self, r: Rect, depth: u32, roots: &mut Vec<Complex64>) {
        let count = match self.winding(&r) {
            Some(c) => c,
            None => {
                // a zero sits on the boundary: nudge the rectangle outward
                let g = 1e-3 * (r.x1 - r.x0).max(r.y1 - r.y0);
                let nudged = Rect {
                    x0: r.x0 - 0.7 * g,
                    x1: r.x1 + 1.3 * g,
                    y0: r.y0,
                    y1: r.y1 + 1.1 * g,
                };
                match self.winding(&nudged) {
                    Some(c) => c,
                    None => return,
                }
            }
        };
        if count <= 0 {
            return;
        }
        let size = (r.x1 - r.x0).max(r.y1 - r.y0);
        if count == 1 {
            let start = Complex64::new((r.x0 + r.x1) / 2.0, (r.y0 + r.y1) / 2.0);
            if let Some(z) = self.newton(start) {
                let m = 1e-9 * size.max(1.0);
                if z.re >= r.x0 - m && z.re <= r.x1 + m && z.im >= r.y0 - m && z.im <= r.y1 + m {
                    roots.push(z);
                    return;
                }
            }
        }
        if size < 1e-9 || depth > 60 {
            let z = Complex64::new((r.x0 + r.x1) / 2.0, (r.y0 + r.y1) / 2.0);
            for _ in 0..count {
                roots.push(z);
            }
            return;
        }
        // off-centre splits keep symmetric roots away from the cut lines
        let frac = 0.5 + 0.0173;
        let (a, b) = if r.x1 - r.x0 >= r.y1 - r.y0 {
            let xm = r.x0 + frac * (r.x1 - r.x0);
            (Rect { x1: xm, ..r }, Rect { x0: xm, ..r })
        } else {
            let ym = r.y0 + frac * (r.y1 - r.y0);
            (Rect { y1: ym, ..r }, Rect { y0: ym, ..r })
        };
        self.search(a, depth + 1, roots);
        self.search(b, depth + 1, roots);
    }

    fn newton(&self, mut z: Complex64) -> Option<Complex64> {
        for _ in 0..60 {
            let f = self.a(z);
            let h = 1e-6 * z.norm().max(1e-2);
            let df = (self.a(z + h) - self.a(z - h)) / (2.0 * h);
            if df.norm() == 0.0 || !df.re.is_finite() {
                return None;
            }
            let step = f / df;
            z -= step;
            if !z.re.is_finite() || z.im <= 0.0 {
                return None;
            }
            if step.norm() < 1e-13 * z.norm().max(1.0) {
                return Some(z);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}
