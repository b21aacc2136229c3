//! Deep domain decomposition for the Poisson equation: physics-informed
//! networks as subdomain solvers inside an overlapping Schwarz iteration,
//! with an optional coarse network coupled through a partition of unity.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod neuralnet;
pub mod problems;
pub mod sampling;
pub mod schwarz;
pub mod verify;

pub use error::{Error, Result};
