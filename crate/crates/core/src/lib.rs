//! Alternating GAN inversion with block-sparse attack recovery.
//!
//! An observation `x'` is modelled as `G(z) + D_a c_a`, where `G` is a known
//! feedforward generator and `D_a` a block-structured attack dictionary. The
//! [`solver`] recovers `(z, c_a)` by gradient steps on `z` and proximal
//! gradient steps on `c_a`; [`diagnostics`] measures the quantities that
//! govern its convergence (error-bound parameter, Hessian extremes, rates);
//! [`synth`] builds realizable instances with known ground truth.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dict;
mod error;
pub mod io;
pub mod linalg;
pub mod netgen;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};

pub use dict::{AttackDictionary, BlockId, BlockIndex, BlockVector};
pub use netgen::{Activation, GeneratorNetwork};
pub use solver::{Init, RedProblem, SolverConfig, SolverState, Trace, UpdateOrder};

/// Dense real vector used throughout the crate.
pub type Vector = ndarray::Array1<f64>;
/// Dense real matrix used throughout the crate.
pub type Matrix = ndarray::Array2<f64>;
