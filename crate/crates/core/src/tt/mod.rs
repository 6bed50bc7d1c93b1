//! Tensor-train tensors and operators.

pub mod io;
pub(crate) mod linalg;
mod operator;
mod tensor;
mod truncate;

pub use operator::{affine_residual_norm, residual_norm, OpCore, TTOperator, DENSE_OPERATOR_LIMIT};
pub use tensor::{strides, unravel, Core, TTTensor, DENSE_ENTRY_LIMIT};
pub use truncate::{TruncationInfo, TruncationPolicy};
