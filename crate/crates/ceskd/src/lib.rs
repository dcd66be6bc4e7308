//! File formats, dataset loaders, experiment configuration and the command
//! layer around [`ceskd_core`].

pub mod config;
pub mod container;
pub mod curriculum_file;
pub mod error;
pub mod loaders;
pub mod report;
pub mod run;

pub use error::{Error, Result};
