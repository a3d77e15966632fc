//! Test functions and the noisy, budget-metered oracle wrapped around them.

mod functions;
mod oracle;

pub use functions::{BenchmarkFunction, FunctionId, SearchSpace};
pub use oracle::NoisyOracle;
