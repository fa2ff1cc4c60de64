//! Gradient-based meta-learning (MAML and Meta-Curvature) on synthetic task
//! families, and intrinsic-dimension analysis of the task-adapted parameters.

pub mod config;
pub mod diffcore;
pub mod error;
pub mod meta;
pub mod numerics;
pub mod pipeline;
pub mod reconstruct;
pub mod subspace;
pub mod taskgen;

pub use error::{Error, Result};
