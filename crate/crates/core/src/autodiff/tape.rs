use std::sync::Arc;

use num_complex::Complex64;

use super::Tensor;
use crate::error::{Error, Result};
use crate::fft;
use crate::fiber;
use crate::rng::SimRng;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Precomputed split step shared with the plain propagator.
pub type SsfmStep = fiber::SplitStep;

enum Op {
    Leaf,
    MatMulT { x: usize, w: usize },
    AddRow { x: usize, b: usize },
    Tanh { x: usize },
    Add { a: usize, b: usize },
    Scale { x: usize, s: f64 },
    Filter { x: usize, h: Arc<[Complex64]> },
    Fft { x: usize, inverse: bool },
    Kerr { x: usize, c: f64 },
    Ssfm { x: usize, step: SsfmStep, cache: Vec<Vec<Complex64>> },
    Upsample { x: usize, factor: usize },
    Downsample { x: usize, factor: usize, phase: usize },
    Normalize { x: usize, energy: f64 },
    Shift { x: usize },
    Windows { x: usize, k: usize },
    Concat { a: usize, b: usize },
    SoftmaxXent { x: usize, labels: Vec<usize>, probs: Vec<f64> },
    HalfSqNorm { x: usize },
    Dot { x: usize, c: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Tape of recorded operations. A graph built with [`Graph::no_grad`] keeps
/// only values, so it is cheap to use for evaluation.
pub struct Graph {
    nodes: Vec<Node>,
    recording: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn complex_of(t: &Tensor) -> Vec<Complex64> {
    t.to_complex()
}

fn expect_complex(t: &Tensor, what: &'static str) -> Result<()> {
    if t.cols != 2 {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: 2,
            got: t.cols,
        });
    }
    Ok(())
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            recording: true,
        }
    }

    pub fn no_grad() -> Self {
        Self {
            nodes: Vec::new(),
            recording: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let op = if self.recording { op } else { Op::Leaf };
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn complex_leaf(&mut self, v: &[Complex64]) -> Var {
        self.leaf(Tensor::from_complex(v))
    }

    /// `x W^T` for `x: [b, in]`, `w: [out, in]`.
    pub fn matmul_t(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if xv.cols != wv.cols {
            return Err(Error::DimensionMismatch {
                context: "dense layer input width",
                expected: wv.cols,
                got: xv.cols,
            });
        }
        let (b, n_in, n_out) = (xv.rows, xv.cols, wv.rows);
        let mut y = vec![0.0; b * n_out];
        for r in 0..b {
            let xr = &xv.data[r * n_in..(r + 1) * n_in];
            for o in 0..n_out {
                let wr = &wv.data[o * n_in..(o + 1) * n_in];
                y[r * n_out + o] = xr.iter().zip(wr).map(|(a, c)| a * c).sum();
            }
        }
        let t = Tensor::from_vec(b, n_out, y)?;
        Ok(self.push(t, Op::MatMulT { x: x.0, w: w.0 }))
    }

    /// Adds the `[1, n]` row `b` to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows != 1 || bv.cols != xv.cols {
            return Err(Error::DimensionMismatch {
                context: "bias width",
                expected: xv.cols,
                got: bv.cols,
            });
        }
        let mut t = xv.clone();
        for row in t.data.chunks_exact_mut(bv.cols) {
            for (a, c) in row.iter_mut().zip(&bv.data) {
                *a += c;
            }
        }
        Ok(self.push(t, Op::AddRow { x: x.0, b: b.0 }))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let mut t = self.value(x).clone();
        t.data.iter_mut().for_each(|v| *v = v.tanh());
        self.push(t, Op::Tanh { x: x.0 })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows != bv.rows || av.cols != bv.cols {
            return Err(Error::DimensionMismatch {
                context: "elementwise add",
                expected: av.len(),
                got: bv.len(),
            });
        }
        let mut t = av.clone();
        t.add_assign(bv);
        Ok(self.push(t, Op::Add { a: a.0, b: b.0 }))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut t = self.value(x).clone();
        t.data.iter_mut().for_each(|v| *v *= s);
        self.push(t, Op::Scale { x: x.0, s })
    }

    /// Circular filtering `IFFT(h . FFT(x))` of a complex sequence.
    pub fn filter(&mut self, x: Var, h: Arc<[Complex64]>) -> Result<Var> {
        let xv = self.value(x);
        expect_complex(xv, "filter input")?;
        if h.len() != xv.rows {
            return Err(Error::DimensionMismatch {
                context: "filter response length",
                expected: xv.rows,
                got: h.len(),
            });
        }
        let mut buf = complex_of(xv);
        fft::apply_transfer(&mut buf, &h);
        Ok(self.push(Tensor::from_complex(&buf), Op::Filter { x: x.0, h }))
    }

    /// Unscaled forward DFT, or the `1/n`-scaled inverse.
    pub fn fft(&mut self, x: Var, inverse: bool) -> Result<Var> {
        let xv = self.value(x);
        expect_complex(xv, "fft input")?;
        let mut buf = complex_of(xv);
        if inverse {
            fft::inverse(&mut buf);
        } else {
            fft::forward(&mut buf);
        }
        Ok(self.push(Tensor::from_complex(&buf), Op::Fft { x: x.0, inverse }))
    }

    /// Pointwise `q exp(-j c |q|^2)`.
    pub fn kerr(&mut self, x: Var, c: f64) -> Result<Var> {
        let xv = self.value(x);
        expect_complex(xv, "kerr input")?;
        let mut buf = complex_of(xv);
        fiber::kerr_rotate(&mut buf, c);
        Ok(self.push(Tensor::from_complex(&buf), Op::Kerr { x: x.0, c }))
    }

    /// `steps` symmetric split steps; white noise of variance `noise_var` is
    /// added after each step (drawn from `rng` exactly like the plain
    /// propagator) and treated as a constant by the backward pass.
    pub fn ssfm(
        &mut self,
        x: Var,
        step: &SsfmStep,
        steps: usize,
        noise_var: f64,
        rng: &mut SimRng,
    ) -> Result<Var> {
        let xv = self.value(x);
        expect_complex(xv, "propagation input")?;
        let mut q = complex_of(xv);
        let mut cache = Vec::new();
        let recording = self.recording;
        step.run(
            &mut q,
            steps,
            noise_var,
            rng,
            |a| {
                if recording {
                    cache.push(a.to_vec());
                }
            },
            None,
        )?;
        Ok(self.push(
            Tensor::from_complex(&q),
            Op::Ssfm {
                x: x.0,
                step: step.clone(),
                cache,
            },
        ))
    }

    /// Zero-stuffing by `factor` of a complex sequence.
    pub fn upsample(&mut self, x: Var, factor: usize) -> Result<Var> {
        let xv = self.value(x);
        expect_complex(xv, "upsample input")?;
        let mut t = Tensor::zeros(xv.rows * factor, 2);
        for r in 0..xv.rows {
            t.data[2 * r * factor] = xv.data[2 * r];
            t.data[2 * r * factor + 1] = xv.data[2 * r + 1];
        }
        Ok(self.push(t, Op::Upsample { x: x.0, factor }))
    }

    /// Keeps rows `phase + k * factor`.
    pub fn downsample(&mut self, x: Var, factor: usize, phase: usize) -> Result<Var> {
        let xv = self.value(x);
        expect_complex(xv, "downsample input")?;
        if factor == 0 || !xv.rows.is_multiple_of(factor) || phase >= factor {
            return Err(Error::invalid("downsampling factor/phase do not fit the sequence"));
        }
        let m = xv.rows / factor;
        let mut t = Tensor::zeros(m, 2);
        for k in 0..m {
            let r = phase + k * factor;
            t.data[2 * k] = xv.data[2 * r];
            t.data[2 * k + 1] = xv.data[2 * r + 1];
        }
        Ok(self.push(t, Op::Downsample { x: x.0, factor, phase }))
    }

    /// Rescales `x` to total energy `energy`.
    pub fn normalize(&mut self, x: Var, energy: f64) -> Result<Var> {
        let xv = self.value(x);
        let n2 = xv.norm_sqr();
        if !(n2 > 0.0) {
            return Err(Error::invalid("cannot normalize an all-zero signal"));
        }
        let s = (energy / n2).sqrt();
        let mut t = xv.clone();
        t.data.iter_mut().for_each(|v| *v *= s);
        Ok(self.push(t, Op::Normalize { x: x.0, energy }))
    }

    /// Adds a constant (e.g. a noise realization); gradients pass unchanged.
    pub fn shift(&mut self, x: Var, c: &Tensor) -> Result<Var> {
        let xv = self.value(x);
        if xv.rows != c.rows || xv.cols != c.cols {
            return Err(Error::DimensionMismatch {
                context: "additive constant",
                expected: xv.len(),
                got: c.len(),
            });
        }
        let mut t = xv.clone();
        t.add_assign(c);
        Ok(self.push(t, Op::Shift { x: x.0 }))
    }

    /// Circular sliding windows of `2k + 1` complex samples around each
    /// position: row `i` holds the real parts of `x[i-k..=i+k]` followed by
    /// their imaginary parts.
    pub fn windows(&mut self, x: Var, k: usize) -> Result<Var> {
        let xv = self.value(x);
        expect_complex(xv, "window input")?;
        let m = xv.rows;
        let w = 2 * k + 1;
        let mut t = Tensor::zeros(m, 2 * w);
        for i in 0..m {
            for j in 0..w {
                let src = (i + m * (k / m + 1) + j - k) % m;
                t.data[i * 2 * w + j] = xv.data[2 * src];
                t.data[i * 2 * w + w + j] = xv.data[2 * src + 1];
            }
        }
        Ok(self.push(t, Op::Windows { x: x.0, k }))
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows != bv.rows {
            return Err(Error::DimensionMismatch {
                context: "concatenation rows",
                expected: av.rows,
                got: bv.rows,
            });
        }
        let cols = av.cols + bv.cols;
        let mut data = Vec::with_capacity(av.rows * cols);
        for r in 0..av.rows {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let t = Tensor::from_vec(av.rows, cols, data)?;
        Ok(self.push(t, Op::Concat { a: a.0, b: b.0 }))
    }

    /// Mean cross-entropy (nats) of row-wise softmax against `labels`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.rows != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "labels per logit row",
                expected: lv.rows,
                got: labels.len(),
            });
        }
        let m = lv.cols;
        let mut probs = vec![0.0; lv.len()];
        let mut loss = 0.0;
        for (r, &l) in labels.iter().enumerate() {
            if l >= m {
                return Err(Error::invalid(format!("label {l} out of range [0, {m})")));
            }
            let row = lv.row(r);
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - mx).exp()).sum();
            for (p, v) in probs[r * m..(r + 1) * m].iter_mut().zip(row) {
                *p = (v - mx).exp() / z;
            }
            loss += z.ln() + mx - row[l];
        }
        let loss = loss / labels.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxXent {
                x: logits.0,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    pub fn half_squared_norm(&mut self, x: Var) -> Var {
        let v = 0.5 * self.value(x).norm_sqr();
        self.push(Tensor::scalar(v), Op::HalfSqNorm { x: x.0 })
    }

    /// Inner product with a constant tensor.
    pub fn dot_const(&mut self, x: Var, c: &Tensor) -> Result<Var> {
        let xv = self.value(x);
        if xv.len() != c.len() {
            return Err(Error::DimensionMismatch {
                context: "inner product",
                expected: xv.len(),
                got: c.len(),
            });
        }
        let v = xv.dot(c);
        Ok(self.push(
            Tensor::scalar(v),
            Op::Dot {
                x: x.0,
                c: c.data.clone(),
            },
        ))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.recording {
            return Err(Error::invalid("graph was built without gradient recording"));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::invalid("backward needs a scalar loss"));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let mut acc = |j: usize, t: Tensor| match &mut grads[j] {
            Some(e) => e.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMulT { x, w } => {
                let (xv, wv) = (&self.nodes[*x].value, &self.nodes[*w].value);
                let (b, n_in, n_out) = (xv.rows, xv.cols, wv.rows);
                let mut gx = Tensor::zeros(b, n_in);
                let mut gw = Tensor::zeros(n_out, n_in);
                for r in 0..b {
                    let gr = &g.data[r * n_out..(r + 1) * n_out];
                    let xr = &xv.data[r * n_in..(r + 1) * n_in];
                    let gxr = &mut gx.data[r * n_in..(r + 1) * n_in];
                    for (o, &go) in gr.iter().enumerate() {
                        if go == 0.0 {
                            continue;
                        }
                        let wr = &wv.data[o * n_in..(o + 1) * n_in];
                        let gwr = &mut gw.data[o * n_in..(o + 1) * n_in];
                        for c in 0..n_in {
                            gxr[c] += go * wr[c];
                            gwr[c] += go * xr[c];
                        }
                    }
                }
                acc(*x, gx);
                acc(*w, gw);
            }
            Op::AddRow { x, b } => {
                let cols = g.cols;
                let mut gb = Tensor::zeros(1, cols);
                for row in g.data.chunks_exact(cols) {
                    for (a, v) in gb.data.iter_mut().zip(row) {
                        *a += v;
                    }
                }
                acc(*x, g.clone());
                acc(*b, gb);
            }
            Op::Tanh { x } => {
                let mut gx = g.clone();
                for (a, y) in gx.data.iter_mut().zip(&node.value.data) {
                    *a *= 1.0 - y * y;
                }
                acc(*x, gx);
            }
            Op::Add { a, b } => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Scale { x, s } => {
                let mut gx = g.clone();
                gx.data.iter_mut().for_each(|v| *v *= s);
                acc(*x, gx);
            }
            Op::Filter { x, h } => {
                let mut buf = complex_of(g);
                fft::apply_transfer_adjoint(&mut buf, h);
                acc(*x, Tensor::from_complex(&buf));
            }
            Op::Fft { x, inverse } => {
                let mut buf = complex_of(g);
                let n = buf.len() as f64;
                // adjoint of the unscaled DFT is n * IDFT; of the scaled IDFT, DFT / n
                if *inverse {
                    fft::forward(&mut buf);
                    buf.iter_mut().for_each(|v| *v /= n);
                } else {
                    fft::inverse(&mut buf);
                    buf.iter_mut().for_each(|v| *v *= n);
                }
                acc(*x, Tensor::from_complex(&buf));
            }
            Op::Kerr { x, c } => {
                let q = complex_of(&self.nodes[*x].value);
                let mut gy = complex_of(g);
                fiber::kerr_adjoint(&q, &mut gy, *c);
                acc(*x, Tensor::from_complex(&gy));
            }
            Op::Ssfm { x, step, cache } => {
                let mut gq = complex_of(g);
                step.adjoint(cache, &mut gq);
                acc(*x, Tensor::from_complex(&gq));
            }
            Op::Upsample { x, factor } => {
                let m = g.rows / factor;
                let mut gx = Tensor::zeros(m, 2);
                for r in 0..m {
                    gx.data[2 * r] = g.data[2 * r * factor];
                    gx.data[2 * r + 1] = g.data[2 * r * factor + 1];
                }
                acc(*x, gx);
            }
            Op::Downsample { x, factor, phase } => {
                let mut gx = Tensor::zeros(g.rows * factor, 2);
                for k in 0..g.rows {
                    let r = phase + k * factor;
                    gx.data[2 * r] = g.data[2 * k];
                    gx.data[2 * r + 1] = g.data[2 * k + 1];
                }
                acc(*x, gx);
            }
            Op::Normalize { x, energy } => {
                let xv = &self.nodes[*x].value;
                let n2 = xv.norm_sqr();
                let s = (energy / n2).sqrt();
                let proj = xv.dot(g) / n2;
                let mut gx = g.clone();
                for (a, xi) in gx.data.iter_mut().zip(&xv.data) {
                    *a = s * (*a - xi * proj);
                }
                acc(*x, gx);
            }
            Op::Shift { x } => acc(*x, g.clone()),
            Op::Windows { x, k } => {
                let m = g.rows;
                let w = 2 * k + 1;
                let mut gx = Tensor::zeros(m, 2);
                for i in 0..m {
                    for j in 0..w {
                        let dst = (i + m * (k / m + 1) + j - k) % m;
                        gx.data[2 * dst] += g.data[i * 2 * w + j];
                        gx.data[2 * dst + 1] += g.data[i * 2 * w + w + j];
                    }
                }
                acc(*x, gx);
            }
            Op::Concat { a, b } => {
                let ca = self.nodes[*a].value.cols;
                let cb = self.nodes[*b].value.cols;
                let mut ga = Vec::with_capacity(g.rows * ca);
                let mut gb = Vec::with_capacity(g.rows * cb);
                for r in 0..g.rows {
                    let row = g.row(r);
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                acc(*a, Tensor::from_vec(g.rows, ca, ga).expect("shape"));
                acc(*b, Tensor::from_vec(g.rows, cb, gb).expect("shape"));
            }
            Op::SoftmaxXent { x, labels, probs } => {
                let lv = &self.nodes[*x].value;
                let m = lv.cols;
                let scale = g.data[0] / labels.len() as f64;
                let mut gx = Tensor::from_vec(lv.rows, m, probs.clone()).expect("shape");
                for (r, &l) in labels.iter().enumerate() {
                    gx.data[r * m + l] -= 1.0;
                }
                gx.data.iter_mut().for_each(|v| *v *= scale);
                acc(*x, gx);
            }
            Op::HalfSqNorm { x } => {
                let mut gx = self.nodes[*x].value.clone();
                gx.data.iter_mut().for_each(|v| *v *= g.data[0]);
                acc(*x, gx);
            }
            Op::Dot { x, c } => {
                let xv = &self.nodes[*x].value;
                let gx = Tensor::from_vec(xv.rows, xv.cols, c.iter().map(|v| v * g.data[0]).collect())
                    .expect("shape");
                acc(*x, gx);
            }
        }
    }
}

/// In-place adjoint of `y = q exp(-j c |q|^2)`:
/// `g_q = conj(g_y) (-j c q^2 e^{-j phi}) + g_y e^{j phi} (1 + j c |q|^2)`.
/// Result of [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, zero if the loss does not depend on it.
    pub fn wrt(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows, like.cols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::adjoint_mismatch;

    fn rand_tensor(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut r = crate::rng::seeded(seed);
        let data = (0..rows * cols)
            .map(|_| crate::rng::complex_gaussian(&mut r, 2.0).re)
            .collect();
        Tensor::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn half_squared_norm_gradient_is_input() {
        let mut g = Graph::new();
        let x = g.leaf(rand_tensor(3, 2, 1));
        let l = g.half_squared_norm(x);
        let gr = g.backward(l).unwrap();
        assert_eq!(gr.get(x).unwrap(), g.value(x));
    }

    #[test]
    fn linear_nodes_are_adjoint() {
        let n = 16;
        let x = rand_tensor(n, 2, 2);
        let h: Arc<[Complex64]> = (0..n)
            .map(|k| Complex64::from_polar(1.0 + k as f64 * 0.1, k as f64))
            .collect::<Vec<_>>()
            .into();
        type Node = Box<dyn Fn(&mut Graph, Var) -> Var>;
        let cases: Vec<(&str, Node)> = vec![
            ("filter", Box::new(move |g, v| g.filter(v, h.clone()).unwrap())),
            ("fft", Box::new(|g, v| g.fft(v, false).unwrap())),
            ("ifft", Box::new(|g, v| g.fft(v, true).unwrap())),
            ("upsample", Box::new(|g, v| g.upsample(v, 3).unwrap())),
            ("downsample", Box::new(|g, v| g.downsample(v, 4, 1).unwrap())),
            ("windows", Box::new(|g, v| g.windows(v, 3).unwrap())),
            ("scale", Box::new(|g, v| g.scale(v, -0.7))),
        ];
        for (name, f) in cases {
            let e = adjoint_mismatch(&x, 7, |g, v| f(g, v)).unwrap();
            assert!(e < 1e-10, "{name}: {e}");
        }
    }

    #[test]
    fn windows_layout() {
        let mut g = Graph::new();
        let x = g.complex_leaf(&[
            Complex64::new(1.0, 10.0),
            Complex64::new(2.0, 20.0),
            Complex64::new(3.0, 30.0),
        ]);
        let w = g.windows(x, 1).unwrap();
        assert_eq!(g.value(w).row(0), &[3.0, 1.0, 2.0, 30.0, 10.0, 20.0]);
        assert_eq!(g.value(w).row(2), &[2.0, 3.0, 1.0, 20.0, 30.0, 10.0]);
    }

    #[test]
    fn no_grad_graph_refuses_backward() {
        let mut g = Graph::no_grad();
        let x = g.leaf(Tensor::scalar(2.0));
        let l = g.half_squared_norm(x);
        assert_eq!(g.value(l).data[0], 2.0);
        assert!(g.backward(l).is_err());
    }
}
