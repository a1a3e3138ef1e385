pub mod autodiff;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod model;
pub mod nlms;
pub mod rir;
pub mod signal;
pub mod split;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use split::Split;
