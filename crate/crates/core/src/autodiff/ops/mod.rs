//! Primitive operations, each recorded on the [`Tape`](super::Tape) with
//! its vector-Jacobian product.

mod basic;
mod loss;
mod nn;
mod spectral;

pub use basic::{gelu_scalar, sigmoid_scalar};
pub use loss::{cosine, s_sisnr_db, COS_CLAMP};
pub use nn::Conv2dSpec;
pub use spectral::{bins_to_tensor, COMPRESS_EPS};

#[allow(unused_imports)]
pub(crate) use nn::gemm;
