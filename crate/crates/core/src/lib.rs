//! Adaptive Darcy/Forchheimer seepage simulation and surrogate classification.
//!
//! The crate covers a 2D cell-centred finite-volume solver for the adaptive and
//! regularized laws, two benchmark scenarios, dataset generation, a dense
//! feed-forward classifier and the evaluation/cross-validation harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constitutive;
pub mod datagen;
pub mod error;
pub mod evalcv;
pub mod grid;
pub mod linalg;
pub mod neural;
pub mod scenarios;
pub mod solver;

pub use error::{Error, Result};
