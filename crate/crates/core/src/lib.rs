//! Cumulative spectrum sensing with small sample sizes.
//!
//! The detector forms overlapping length-`L` sensing vectors from a real
//! sample stream, keeps a running sample covariance, shrinks it toward a
//! scaled identity with the oracle-approximating shrinkage (OAS) rule and
//! averages the max/min eigenvalue ratio of the shrunk estimate over time.
//! A primary user is declared present as soon as the running average
//! crosses a threshold calibrated for a target false-alarm probability.
//!
//! Modules:
//! - [`signal`]: noise and primary-user generators, SNR mixing, sensing segments
//! - [`linalg`]: symmetric matrices, streaming covariance, eigen-solvers
//! - [`shrinkage`]: OAS coefficient (closed form and fixed-point iteration)
//! - [`detectors`]: the cumulative detector, its one-shot variant and baselines
//! - [`threshold`]: analytic Tracy–Widom and empirical Monte-Carlo thresholds
//! - [`harness`]: configuration-driven Monte-Carlo sweeps and CSV output

pub mod detectors;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod rng;
pub mod shrinkage;
pub mod signal;
pub mod threshold;

pub use error::{Error, Result};
