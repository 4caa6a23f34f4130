//! Differentiable nonlinear fiber simulation with z-spatial diversity
//! receivers, learned transceivers and soft-decision metrics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod equalizer;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod fiber;
pub mod link;
pub mod metrics;
pub mod rng;
pub mod scattering;
pub mod signal;
pub mod soliton;
pub mod soliton_link;
pub mod transceiver;

pub use error::{Error, Result};
