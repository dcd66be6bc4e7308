use alloc::string::String;

/// Errors produced by the training core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A tensor or layer received data of the wrong shape.
    #[error("shape error at {location}: {detail}")]
    Shape { location: String, detail: String },
    /// Inconsistent configuration (pool sizes, paths, hyperparameters).
    #[error("configuration error: {0}")]
    Config(String),
    /// Operation called in the wrong order.
    #[error("state error: {0}")]
    State(String),
    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Invalid dataset contents.
    #[error("data error: {0}")]
    Data(String),
    /// A NaN or infinity showed up where it must not.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape_err(location: impl Into<String>, detail: impl Into<String>) -> Error {
    Error::Shape {
        location: location.into(),
        detail: detail.into(),
    }
}
