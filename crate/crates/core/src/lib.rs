//! Event-camera embedding with sparse, asynchronous token updates.

// `!(x >= lo)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alert;
pub mod archive;
pub mod embedder;
pub mod error;
pub mod events;
pub mod grid;
pub mod harness;
pub mod head;
pub mod model;
pub mod registry;

pub use error::{Error, Result};
