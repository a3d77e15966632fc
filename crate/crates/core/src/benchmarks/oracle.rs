use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::BenchmarkFunction;
use crate::error::{Error, Result};

/// Budget-metered evaluator returning `L(x) + tau * N(0, 1)`.
///
/// Every draw is charged against `budget_total`. Requests that do not fit the remaining
/// budget fail with [`Error::BudgetExhausted`] before any draw is made.
#[derive(Clone, Debug)]
pub struct NoisyOracle {
    target: BenchmarkFunction,
    tau: f64,
    budget_total: u64,
    budget_used: u64,
    rng: ChaCha8Rng,
}

impl NoisyOracle {
    pub fn new(target: BenchmarkFunction, tau: f64, budget_total: u64, seed: u64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::invalid(format!("noise level must be >= 0, got {tau}")));
        }
        if budget_total == 0 {
            return Err(Error::invalid("budget must be positive"));
        }
        Ok(Self {
            target,
            tau,
            budget_total,
            budget_used: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn target(&self) -> &BenchmarkFunction {
        &self.target
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn budget_total(&self) -> u64 {
        self.budget_total
    }

    pub fn budget_used(&self) -> u64 {
        self.budget_used
    }

    pub fn remaining(&self) -> u64 {
        self.budget_total - self.budget_used
    }

    fn reserve(&mut self, count: u64) -> Result<()> {
        let remaining = self.remaining();
        if count > remaining {
            return Err(Error::BudgetExhausted {
                requested: count,
                remaining,
            });
        }
        self.budget_used += count;
        Ok(())
    }

    fn noise_sum(&mut self, count: u64) -> f64 {
        if self.tau == 0.0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for _ in 0..count {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            sum += z;
        }
        self.tau * sum
    }

    /// One noisy draw at `x`; charges one evaluation.
    pub fn noisy_sample(&mut self, x: &[f64]) -> Result<f64> {
        let value = self.target.evaluate_true(x)?;
        self.reserve(1)?;
        Ok(value + self.noise_sum(1))
    }

    /// Average of `m` noisy draws at `x`; charges `m` evaluations, all or nothing.
    pub fn mean_evaluate(&mut self, x: &[f64], m: u64) -> Result<f64> {
        if m == 0 {
            return Err(Error::invalid("re-evaluation count must be >= 1"));
        }
        let value = self.target.evaluate_true(x)?;
        self.reserve(m)?;
        Ok(value + self.noise_sum(m) / m as f64)
    }

    /// Same distribution as [`mean_evaluate`](Self::mean_evaluate) but not charged.
    /// Only used to replicate accounting that does not bill the mean's re-evaluation.
    pub fn mean_evaluate_unmetered(&mut self, x: &[f64], m: u64) -> Result<f64> {
        if m == 0 {
            return Err(Error::invalid("re-evaluation count must be >= 1"));
        }
        let value = self.target.evaluate_true(x)?;
        Ok(value + self.noise_sum(m) / m as f64)
    }

    /// Draws `m` individual noisy values; charges `m` evaluations, all or nothing.
    pub fn sample_batch(&mut self, x: &[f64], m: u64) -> Result<Vec<f64>> {
        let value = self.target.evaluate_true(x)?;
        self.reserve(m)?;
        Ok((0..m).map(|_| value + self.noise_sum(1)).collect())
    }
}
