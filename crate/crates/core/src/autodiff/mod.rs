//! Minimal dense array engine with reverse-mode differentiation.
//!
//! Everything the models and losses in this crate need: a handful of
//! elementwise nonlinearities, matrix products, reductions, concatenation and
//! slicing, plus reparameterized Gaussian sampling and a diagonal-Gaussian KL.
//! All values are `f64` and all information quantities are in nats.

mod gaussian;
mod gradcheck;
mod graph;
pub(crate) mod kernels;
mod tensor;

pub use gaussian::{gaussian_sample, kl_diag_gauss, kl_diag_gauss_rows, kl_diag_gauss_value};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use tensor::{Result, Tensor, TensorError};
