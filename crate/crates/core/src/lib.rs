//! Training core for curriculum-based expert selection in knowledge distillation.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is pure
//! computation: tensors and hand-derived backprop, SGD, the distillation losses,
//! difficulty ranking and bucketing, and the multi-step distillation engine.
//! File formats, configuration and the command line live in the `ceskd` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod curriculum;
pub mod data;
pub mod engine;
mod error;
pub mod experiments;
pub mod loss;
pub mod nn;
pub mod optim;
pub mod rng;
mod scalar;
pub mod stats;
mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
