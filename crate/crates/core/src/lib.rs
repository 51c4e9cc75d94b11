pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod gan;
pub mod model;
pub mod rgflow;
pub mod tensor;

pub use error::{Error, Result};
