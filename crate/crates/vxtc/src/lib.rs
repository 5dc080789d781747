//! Lossless geometry codec for quantized LiDAR point clouds.
//!
//! The pipeline builds a Morton-ordered octree over the quantized cloud,
//! predicts per-node 255-way occupancy distributions with a small sparse
//! convolutional context model, and entropy-codes the occupancy bytes with
//! a carry-propagating range coder. Two inference paths share one model
//! structure: a floating-point reference path, and an integer-only path
//! whose arithmetic is bit-exact across runs, thread counts, and platforms,
//! so its bitstreams are portable by construction.

pub mod calibrate;
pub mod codec;
pub mod coords;
pub mod diag;
pub mod error;
pub mod intmodel;
pub mod metrics;
pub mod model;
pub mod morton;
pub mod octree;
pub mod points;
pub mod rc;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
