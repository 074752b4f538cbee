pub mod boundary;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod lu;
pub mod operators;
pub mod problems;
pub mod schur;
pub mod solvers;
pub mod study;

pub use error::{IbseError, Result};
