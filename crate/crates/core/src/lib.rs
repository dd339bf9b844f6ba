//! Root-cause attribution for call edges missed by field-based static call
//! graphs of a small JavaScript subset.

pub mod frontend;
pub mod ids;
pub mod interp;
pub mod labeler;
pub mod metrics;
pub mod acg;
pub mod copies;
pub mod detector;
pub mod pipeline;
pub mod report;

use thiserror::Error;

/// A malformed input artifact.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{file}: field `{field}`: {message}")]
pub struct SchemaError {
    pub file: String,
    pub field: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(file: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError {
            file: file.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}
