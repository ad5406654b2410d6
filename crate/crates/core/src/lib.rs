//! Federated single-path architecture search, simulated in one process.

pub mod data;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod local_search;
pub mod seed;
pub mod supernet;
pub mod tensor;

pub use error::{Error, Result};
