//! Minimal neural-network toolkit: tensors, reverse-mode autodiff, a GRU
//! layer, Adam, finite-difference checking and a checkpoint container.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod gru;
pub mod params;
pub mod tensor;

pub use adam::{adam_step, Adam, AdamState};
pub use checkpoint::Checkpoint;
pub use gradcheck::{finite_difference_gradient, max_relative_error};
pub use graph::{Graph, NodeId};
pub use gru::{gru_cell_forward, GruLayer};
pub use params::{ModelParams, ParamId};
pub use tensor::Tensor;
