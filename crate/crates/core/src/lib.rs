pub mod catalog;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod field_io;
pub mod geometry;
pub mod grid;
pub mod hermitian;
pub mod jet;
pub mod krylov;
pub mod manufactured;
pub mod monitor;
pub mod pointwise;
pub mod solver;

pub use error::{Error, Result};
