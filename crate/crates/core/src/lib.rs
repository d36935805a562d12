//! Quantile-free prediction intervals for node regression.
//!
//! A two-layer GraphSAGE encoder feeds two linear heads: one predicts the
//! node value, the other a positive half-width. Training minimizes a joint
//! coverage / width objective directly, with no quantile inputs and no
//! post-hoc calibration. The crate also carries the quantile-regression and
//! MC-dropout baselines, the interval metrics, and the experiment harness.

pub mod diff;
pub mod error;
pub mod graph;
pub mod harness;

pub mod losses;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
