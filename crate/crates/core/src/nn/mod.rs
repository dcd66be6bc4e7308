//! Layers, models and hand-written backpropagation.

mod kernels;
mod model;
mod spec;

pub use model::{init_weights, Gradients, Model, Tape};
pub use spec::{LayerSpec, ModelSpec};
