//! Compressed sensing with an untrained convolutional generator.
//!
//! The core idea: instead of a sparsity prior, reconstruct a signal `x` from
//! linear measurements `y = A x + eta` by fitting the weights `w` of a
//! randomly-initialized DCGAN-style generator `G(z; w)` so that
//! `A G(z; w) ~ y`. The latent `z` stays fixed; only the network weights are
//! optimized, minimizing
//!
//! ```text
//!   || y - A G(z; w) ||^2  +  lambda_t * TV(G(z; w))  +  lambda_l * LR(w)
//! ```
//!
//! where `TV` is anisotropic total variation on the output image and `LR` is
//! a learned layer-wise Gaussian penalty on the weights themselves. Because
//! the generator is heavily over-parameterized it can fit noise given enough
//! iterations, so the solver early-stops on the measurement loss alone,
//! never consulting the ground truth.
//!
//! Modules:
//!
//! - [`tensor`]: minimal f64 tensor plus the differentiable primitives the
//!   generator is made of (transposed convolution, activations, channel
//!   normalization), each with a hand-chained backward pass.
//! - [`linops`]: measurement operators (dense Gaussian, radially-masked
//!   Fourier, identity) with exact adjoints, and measurement noise.
//! - [`generator`]: DCGAN-style generator built from `tensor` primitives.
//! - [`regularization`]: total variation, the learned Gaussian weight
//!   penalty, and the moment-matching estimator for its statistics.
//! - [`solver`]: RMSProp-with-momentum fitting loop with restarts and
//!   measurement-loss early stopping.
//! - [`lasso`]: FISTA Lasso in a 2-D DCT basis, the classical baseline.
//! - [`theory`]: desk-scale harness for the over-parameterized descent
//!   theory (one-hidden-layer model, Jacobian bounds, descent traces).
//! - [`metrics`], [`phantom`]: per-pixel error metrics and deterministic
//!   synthetic test images.
//! - [`io`], [`cli`]: on-disk containers, image round-trips, run manifests,
//!   and the thin command-line front end.
//!
//! Every random quantity is drawn from an explicitly seeded stream, so any
//! result in this crate is bit-reproducible from its recorded seeds. See the
//! `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod error;
pub mod generator;
pub mod io;
pub mod lasso;
pub mod linops;
pub mod metrics;
pub mod phantom;
pub mod regularization;
pub mod solver;
pub mod tensor;
pub mod theory;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod check;
