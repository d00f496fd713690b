//! Slice-level forward and backward kernels.
//!
//! Every reduction runs in a fixed sequential order, so identical inputs give
//! bit-identical outputs.

pub mod activation;
pub mod conv;
pub mod matmul;
pub mod norm;
pub mod pool;

pub use activation::*;
pub use conv::*;
pub use matmul::*;
pub use norm::*;
pub use pool::*;
