//! Finite-dimensional quantum ergodicity laboratory.

pub mod algebra;
pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub mod ergodicity;
pub mod gns;
pub mod states;
pub mod models;
pub mod cli;
