//! Reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records operations in execution order; [`Tape::backward`]
//! walks it once in reverse. Operations live as methods on the tape (see
//! [`ops`]) and report shape errors instead of panicking.

mod gradcheck;
pub mod ops;
mod store;
pub mod suite;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, grad_check_with, GradCheckConfig};
pub use ops::Conv2dSpec;
pub use store::{ParamIndexEntry, ParamStore, Params};
pub use tape::{BackCtx, BackwardFn, Gradients, Tape, Var};
pub use tensor::Tensor;
