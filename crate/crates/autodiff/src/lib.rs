//! Reverse-mode automatic differentiation over dense f64 tensors.
//!
//! The primitive set covers what flow-warping video models need:
//! convolutions (plain and transposed), attention math, batch norm,
//! pooling, bilinear sampling, and the usual elementwise/reduction ops.
//! Operations are methods on [`Tape`]; `tape.backward(&loss)` replays the
//! recording in reverse and accumulates gradients on `requires_grad`
//! leaves. [`gradient_check`] verifies any scalar-valued composition
//! against central finite differences.

mod error;
mod gradcheck;
mod kernels;
mod ops;
mod tape;
mod tensor;

pub use error::{AdError, Result};
pub use gradcheck::{gradient_check, DEFAULT_EPS};
pub use kernels::{mm, mm_nt, mm_tn, transpose};
pub use ops::Activation;
pub use tape::{Gradients, Tape};
pub use tensor::{Tensor, TensorId};
