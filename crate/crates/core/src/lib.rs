//! Multi-product splitting integrators for semilinear evolution equations on
//! periodic grids.
//!
//! A step combines products of linear and nonlinear sub-flows with exact
//! rational weights. [`scheme`] holds the coefficient catalog and the step
//! kernel, [`order`] certifies it, and [`harness`] drives whole runs.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flows;
pub mod grid;
pub mod harness;
pub mod models;
pub mod order;
pub mod scheme;
pub mod state;

pub use error::{Error, Result};
pub use grid::{Field, SpectralGrid};
pub use harness::{RunConfig, RunRecord};
pub use models::{ModelId, ModelSpec};
pub use scheme::{Rational, SchemeClass, SplitScheme};
pub use state::State;
