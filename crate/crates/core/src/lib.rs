//! Stochastic orders for Lévy processes, jump diffusions and normal
//! variance-mean mixtures: hypothesis checks on characteristics, samplers,
//! exact order checks for discrete laws and Monte Carlo order tests.

// Argument checks are written as `!(x > 0.0)` on purpose so that NaN is
// rejected along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod harness;
pub mod jumpdiff;
pub mod levy;
pub mod markov;
pub mod orders;
pub mod quadrature;
pub mod sample;
pub mod samplers;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use sample::SampleMatrix;
