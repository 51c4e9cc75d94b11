//! Dense tensors with a reverse-mode autodiff graph that supports
//! differentiating gradients again (double backprop).

mod array;
mod gradcheck;
mod graph;
pub mod kernels;

pub use array::Array;
pub use gradcheck::{central_difference, finite_diff_check, max_relative_error};
pub use graph::{Gradients, Graph, OpKind, Tensor};
pub use kernels::{ConvParams, PoolParams};
