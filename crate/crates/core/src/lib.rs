pub mod analysis;
pub mod cli;
pub mod error;
pub mod graphs;
pub mod harness;
pub mod linalg;
pub mod mixing;
pub mod problem;
pub mod seed;
pub mod solvers;

pub use error::{Error, Result};
