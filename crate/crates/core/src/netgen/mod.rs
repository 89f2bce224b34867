//! Explicit feedforward generators `G(z) = σ(W_L ⋯ σ(W_1 z))` and their
//! hand-derived first-order calculus.

mod activation;
mod network;

pub use activation::Activation;
pub use network::{hessian_vector_product, GeneratorNetwork};
