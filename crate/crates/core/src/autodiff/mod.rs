//! Minimal reverse-mode automatic differentiation over dense `f32` tensors.
//!
//! Graphs are built fresh for every forward pass and thrown away after
//! `backward`. Leaves are either [`Graph::variable`]s (gradient tracked) or
//! [`Graph::constant`]s; gradient work is skipped for subgraphs that only
//! depend on constants.

mod adam;
mod graph;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use graph::{Graph, Var};
pub use tensor::Tensor;

pub(crate) use graph::sigmoid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("dimension error: {0}")]
    Shape(String),
    #[error("max pool over an empty point axis")]
    EmptyPool,
    #[error("backward needs a scalar root, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
}
