use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Gradients, Graph, Var};
use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

/// Fully connected network; layer `i` maps `sizes[i]` to `sizes[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
    activations: Vec<Activation>,
}

impl Mlp {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization, `tanh`
    /// on hidden layers and a linear output. With `zero_output` the last
    /// layer starts at zero, so a residual network starts as the identity.
    pub fn new(sizes: &[usize], rng: &mut SimRng, zero_output: bool) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid("network needs at least two non-empty layer sizes"));
        }
        let n_layers = sizes.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        let mut activations = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (n_in as f64).sqrt();
            let last = l + 1 == n_layers;
            let mut draw = |n: usize| -> Vec<f64> {
                (0..n)
                    .map(|_| {
                        let v = rng.random_range(-bound..bound);
                        if last && zero_output {
                            0.0
                        } else {
                            v
                        }
                    })
                    .collect()
            };
            weights.push(Tensor::from_vec(n_out, n_in, draw(n_out * n_in))?);
            biases.push(Tensor::from_vec(1, n_out, draw(n_out))?);
            activations.push(if last {
                Activation::Identity
            } else {
                Activation::Tanh
            });
        }
        Ok(Self {
            weights,
            biases,
            activations,
        })
    }

    /// Builds a network from explicit layers.
    pub fn from_layers(layers: Vec<(Tensor, Tensor, Activation)>) -> Result<Self> {
        let mut mlp = Self {
            weights: Vec::new(),
            biases: Vec::new(),
            activations: Vec::new(),
        };
        for (w, b, a) in layers {
            if b.rows != 1 || b.cols != w.rows {
                return Err(Error::invalid("bias must be a row matching the layer output"));
            }
            if let Some(prev) = mlp.weights.last() {
                if prev.rows != w.cols {
                    return Err(Error::DimensionMismatch {
                        context: "layer chaining",
                        expected: prev.rows,
                        got: w.cols,
                    });
                }
            }
            mlp.weights.push(w);
            mlp.biases.push(b);
            mlp.activations.push(a);
        }
        if mlp.weights.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        Ok(mlp)
    }

    /// Single linear layer computing the identity.
    pub fn identity(n: usize) -> Self {
        let mut w = Tensor::zeros(n, n);
        for i in 0..n {
            w.data[i * n + i] = 1.0;
        }
        Self {
            weights: vec![w],
            biases: vec![Tensor::zeros(1, n)],
            activations: vec![Activation::Identity],
        }
    }

    pub fn input_size(&self) -> usize {
        self.weights[0].cols
    }

    pub fn output_size(&self) -> usize {
        self.weights.last().map(|w| w.rows).unwrap_or(0)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(self.weights.iter().map(|w| w.rows));
        s
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Tensor::len).sum::<usize>()
            + self.biases.iter().map(Tensor::len).sum::<usize>()
    }

    /// Parameter tensors in the order `w0, b0, w1, b1, ...`.
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    /// Registers the parameters as leaves of `g`.
    pub fn bind(&self, g: &mut Graph) -> BoundMlp {
        let vars = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| (g.leaf(w.clone()), g.leaf(b.clone())))
            .collect();
        BoundMlp {
            vars,
            activations: self.activations.clone(),
        }
    }

    /// Forward pass on a single input vector.
    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::no_grad();
        let b = self.bind(&mut g);
        let x = g.leaf(Tensor::from_vec(1, input.len(), input.to_vec())?);
        let y = b.forward(&mut g, x)?;
        Ok(g.value(y).data.clone())
    }
}

/// Parameters of an [`Mlp`] registered on a graph.
pub struct BoundMlp {
    vars: Vec<(Var, Var)>,
    activations: Vec<Activation>,
}

impl BoundMlp {
    /// Applies the network row-wise to `x: [batch, input]`.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let mut h = x;
        for (&(w, b), act) in self.vars.iter().zip(&self.activations) {
            let z = g.matmul_t(h, w)?;
            let z = g.add_row(z, b)?;
            h = match act {
                Activation::Tanh => g.tanh(z),
                Activation::Identity => z,
            };
        }
        Ok(h)
    }

    /// Gradients in the order of [`Mlp::tensors`].
    pub fn gradients(&self, grads: &Gradients, g: &Graph) -> Vec<Tensor> {
        self.vars
            .iter()
            .flat_map(|&(w, b)| [grads.wrt(w, g.value(w)), grads.wrt(b, g.value(b))])
            .collect()
    }
}
