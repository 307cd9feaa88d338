use thiserror::Error;

use crate::context::VarId;

/// Errors surfaced by the simulator and decision engine.
#[derive(Debug, Error)]
pub enum HandoffError {
    #[error("non-finite input value: {0}")]
    NonFiniteInput(f64),

    #[error("context variable {0} missing from snapshot")]
    MissingContext(VarId),

    #[error("input error: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),
}

/// Errors raised while loading and validating a scenario file.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scenario JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("unknown variable id {id} referenced in {location}")]
    UnknownVariable { id: String, location: String },

    #[error("weights in {location} sum to {sum}, expected 1")]
    WeightSum { location: String, sum: f64 },

    #[error("tolerance range for {id} has lower {lower} >= upper {upper}")]
    BadRange { id: String, lower: f64, upper: f64 },

    #[error("missing required section: {0}")]
    MissingSection(String),

    #[error("invalid scenario: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, HandoffError>;
