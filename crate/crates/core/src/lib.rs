//! Multicritical circle maps and the dimension of their invariant measure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cf;
pub mod dimension;
pub mod error;
pub mod map;
pub mod measure;
pub mod numeric;
pub mod partition;
pub mod pipeline;
pub mod quadratic;
pub mod report;
pub mod rotation;

pub use error::{Error, Result};
