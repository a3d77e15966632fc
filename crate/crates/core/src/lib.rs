//! CMA-ES with adaptive re-evaluation for objectives corrupted by additive Gaussian noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`benchmarks`]: test functions and the budget-metered noisy oracle.
//! - [`es`]: the CMA-ES state machine with pluggable recombination weights.
//! - [`ar`]: improvement-proportional weights, gradient smoothing and the optimal
//!   re-evaluation count derived from the efficiency lower bound.
//! - [`lipschitz`]: Gaussian-process estimate of the gradient's Lipschitz constant.
//! - [`noise_probe`]: pre-run estimate of the noise level.
//! - [`baselines`]: fixed re-evaluation and three-stage schedules.
//! - [`efficiency`]: the frozen-state efficiency experiment.
//! - [`harness`]: configs, run records, ECDFs and result aggregation.

pub mod ar;
pub mod baselines;
pub mod benchmarks;
pub mod error;
pub mod efficiency;
pub mod es;
pub mod harness;
pub mod lipschitz;
pub mod noise_probe;
pub mod trace;

pub use error::{Error, Result};
