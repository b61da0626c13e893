//! Library surface of the batch CLI: model-file parsing and deterministic
//! report output, reused by the binary and its integration tests.

pub mod model;
pub mod output;
