//! Minimal reverse-mode differentiation for the transceiver pipeline.
//!
//! Every tensor is a real row-major matrix. Complex sequences are stored as
//! `[n, 2]` matrices of `(re, im)` rows; a gradient stored in that layout is
//! `dL/dre + j dL/dim`, so complex-linear nodes back-propagate with their
//! Hermitian adjoint.

mod adam;
mod checkpoint;
mod gradcheck;
mod mlp;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, NetworkEntry};
pub use gradcheck::{adjoint_mismatch, gradient_check};
pub use mlp::{Activation, BoundMlp, Mlp};
pub use tape::{Gradients, Graph, SsfmStep, Var};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "tensor data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn from_complex(v: &[Complex64]) -> Self {
        let mut data = Vec::with_capacity(2 * v.len());
        for c in v {
            data.push(c.re);
            data.push(c.im);
        }
        Self {
            rows: v.len(),
            cols: 2,
            data,
        }
    }

    /// Reads an `[n, 2]` tensor as complex values.
    pub fn to_complex(&self) -> Vec<Complex64> {
        debug_assert_eq!(self.cols, 2);
        self.data
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
