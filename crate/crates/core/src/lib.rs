//! Random metrics on hierarchical graphs.
//!
//! A hierarchical graph is built by repeatedly substituting every edge with a
//! copy of a small brick graph. Assigning random lengths to the edges of the
//! brick and scaling them by random factors at each level gives a random
//! length structure whose IO-distance satisfies a distributional fixed point
//! equation. This crate samples, renormalizes and analyses such equations.

pub mod brickgraph;
pub mod critical;
pub mod dist;
pub mod error;
pub mod geometry;
pub mod io;
pub mod renorm;
pub mod rng;
pub mod sierpinski;
pub mod stats;

pub use error::{Error, Result};
