use super::tape::{Graph, Var};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng;

/// Largest component-wise relative difference between the reverse-mode
/// gradient of `f` at `x0` and central differences with step `h`.
///
/// Components are compared relative to `max(|analytic|, |numeric|)`, floored
/// at `1e-3` of the largest gradient component so that entries which are
/// zero up to rounding do not dominate.
pub fn gradient_check<F>(f: F, x0: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let mut g = Graph::new();
    let x = g.leaf(x0.clone());
    let loss = f(&mut g, x)?;
    let analytic = g.backward(loss)?.wrt(x, x0);

    let eval = |t: &Tensor| -> Result<f64> {
        let mut g = Graph::no_grad();
        let v = g.leaf(t.clone());
        let l = f(&mut g, v)?;
        Ok(g.value(l).data[0])
    };
    let mut numeric = Vec::with_capacity(x0.len());
    let mut probe = x0.clone();
    for i in 0..x0.len() {
        let orig = probe.data[i];
        probe.data[i] = orig + h;
        let fp = eval(&probe)?;
        probe.data[i] = orig - h;
        let fm = eval(&probe)?;
        probe.data[i] = orig;
        numeric.push((fp - fm) / (2.0 * h));
    }
    let scale = analytic
        .data
        .iter()
        .chain(&numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let floor = 1e-3 * scale;
    Ok(analytic
        .data
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max))
}

/// Relative mismatch `|<A x, y> - <x, A^T y>|` for the linear map recorded by
/// `f`, with a random `y` drawn from `seed`.
pub fn adjoint_mismatch<F>(x0: &Tensor, seed: u64, f: F) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Var,
{
    let mut g = Graph::new();
    let x = g.leaf(x0.clone());
    let ax = f(&mut g, x);
    let shape = g.value(ax).clone();
    let mut r = rng::seeded(seed);
    let y = Tensor::from_vec(
        shape.rows,
        shape.cols,
        (0..shape.len())
            .map(|_| rng::complex_gaussian(&mut r, 2.0).re)
            .collect(),
    )?;
    let lhs = shape.dot(&y);
    let l = g.dot_const(ax, &y)?;
    let aty = g.backward(l)?.wrt(x, x0);
    let rhs = x0.dot(&aty);
    let denom = lhs.abs().max(rhs.abs());
    if !denom.is_finite() {
        return Err(Error::Numerical("adjoint test overflowed".into()));
    }
    Ok(if denom == 0.0 { 0.0 } else { (lhs - rhs).abs() / denom })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let e = gradient_check(
            |g, x| {
                let y = g.half_squared_norm(x);
                Ok(g.scale(y, 2.0))
            },
            &Tensor::scalar(3.0),
            1e-4,
        )
        .unwrap();
        assert!(e < 1e-10, "{e}");
    }
}
