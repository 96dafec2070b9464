//! Minimal numeric substrate: dense row-major tensors, fixed-topology MLPs
//! (two ReLU hidden layers plus a linear head) with reverse-mode gradients,
//! and the Adam optimizer.
//!
//! Everything is generic over [`Scalar`] so the same kernels run in `f32` for
//! training and in `f64` for gradient checking.

mod adam;
pub mod gradcheck;
mod mlp;
mod params;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{central_differences, finite_diff_check, max_relative_error};
pub use mlp::{backward, forward, input_gradient, Backward, ForwardPass, Mlp};
pub use params::{HeadInit, MlpArch, ParamSet};
pub use tensor::{Scalar, Tensor};
pub(crate) use tensor::concat_cols;
