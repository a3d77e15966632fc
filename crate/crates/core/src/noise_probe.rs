//! Pre-run estimate of the additive noise level τ.
//!
//! Batches of `m` noisy draws are taken at a single point for several batch sizes. Each batch
//! yields the standard error of its mean, `ŝ(m) = std / √m`, whose expectation is `τ / √m`; a
//! one-parameter least-squares fit of that curve gives `τ̂`. The unbiased sample variance still
//! gives a biased standard deviation (`E[std] = c4(m) τ`), which is divided out by default.
//!
//! [`StdReading::RawStd`] reproduces the alternative reading where the raw per-batch standard
//! deviation is fitted against `τ / √m`. It underestimates τ and exists for comparison only.

use serde::{Deserialize, Serialize};

use crate::benchmarks::NoisyOracle;
use crate::error::{Error, Result};

/// What a batch contributes as its `ŝ(m)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdReading {
    /// Standard deviation of the batch mean, `std / √m`.
    #[default]
    StandardError,
    /// Standard deviation of the raw draws.
    RawStd,
}

/// Averaged `ŝ(m)` over `repeats` batches of size `m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StdObservation {
    pub m: u64,
    pub s: f64,
    pub repeats: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    /// Fraction of the run budget spent on the probe.
    pub budget_fraction: f64,
    /// Smallest probe budget, so that at least two batch sizes fit.
    pub min_budget: u64,
    pub batch_sizes: Vec<u64>,
    pub reading: StdReading,
    pub bias_correction: bool,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            budget_fraction: 1e-3,
            min_budget: 6,
            batch_sizes: vec![2, 4, 8, 16, 32, 64],
            reading: StdReading::StandardError,
            bias_correction: true,
        }
    }
}

impl ProbeSettings {
    pub fn budget_for(&self, budget_total: u64) -> u64 {
        ((self.budget_fraction * budget_total as f64).ceil() as u64).max(self.min_budget)
    }
}

/// Outcome of [`probe_noise`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub tau_hat: f64,
    pub spent: u64,
    pub observations: Vec<StdObservation>,
}

/// `E[s] / σ` for the square root of the unbiased variance of `n` normal draws:
/// `√(2 / (n-1)) Γ(n/2) / Γ((n-1)/2)`.
pub fn c4(n: u64) -> f64 {
    assert!(n >= 2, "c4 needs n >= 2");
    // r(k) = Γ(k/2) / Γ((k-1)/2), r(2) = 1/√π, r(k+1) = ((k-1)/2) / r(k).
    let mut r = 1.0 / std::f64::consts::PI.sqrt();
    for k in 2..n {
        r = ((k - 1) as f64 / 2.0) / r;
    }
    (2.0 / (n - 1) as f64).sqrt() * r
}

/// Draws `repeats` batches of `m` samples at `x`; charges `m · repeats`.
pub fn sample_std(
    oracle: &mut NoisyOracle,
    x: &[f64],
    m: u64,
    repeats: u64,
    reading: StdReading,
    bias_correction: bool,
) -> Result<StdObservation> {
    if m < 2 {
        return Err(Error::invalid(format!("batch size must be >= 2, got {m}")));
    }
    if repeats == 0 {
        return Err(Error::invalid("repeats must be >= 1"));
    }
    let needed = m.saturating_mul(repeats);
    if needed > oracle.remaining() {
        return Err(Error::BudgetExhausted {
            requested: needed,
            remaining: oracle.remaining(),
        });
    }
    let correction = if bias_correction { c4(m) } else { 1.0 };
    let scale = match reading {
        StdReading::StandardError => 1.0 / (m as f64).sqrt(),
        StdReading::RawStd => 1.0,
    };
    let mut total = 0.0;
    for _ in 0..repeats {
        let draws = oracle.sample_batch(x, m)?;
        let mean = draws.iter().sum::<f64>() / m as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        total += var.sqrt() / correction * scale;
    }
    Ok(StdObservation {
        m,
        s: total / repeats as f64,
        repeats,
    })
}

/// Least-squares fit of `s_k = τ̂ / √m_k`.
pub fn estimate_tau(observations: &[StdObservation]) -> Result<f64> {
    let mut sizes: Vec<u64> = observations.iter().map(|o| o.m).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::invalid(
            "noise estimation needs observations for at least two batch sizes",
        ));
    }
    if observations.iter().any(|o| !(o.s.is_finite() && o.s >= 0.0) || o.m == 0) {
        return Err(Error::invalid("observations must have m >= 1 and finite s >= 0"));
    }
    let (num, den) = observations.iter().fold((0.0, 0.0), |(num, den), o| {
        let c = 1.0 / (o.m as f64).sqrt();
        (num + o.s * c, den + c * c)
    });
    Ok((num / den).max(0.0))
}

/// Runs the probe schedule at `x` within `budget` evaluations and fits τ̂.
///
/// The budget is split evenly across batch sizes; sizes that do not fit even once are skipped.
pub fn probe_noise(
    oracle: &mut NoisyOracle,
    x: &[f64],
    budget: u64,
    settings: &ProbeSettings,
) -> Result<ProbeResult> {
    if settings.batch_sizes.is_empty() {
        return Err(Error::invalid("no probe batch sizes configured"));
    }
    let share = budget / settings.batch_sizes.len() as u64;
    let start = oracle.budget_used();
    let mut observations = Vec::new();
    for &m in &settings.batch_sizes {
        let mut repeats = share / m.max(1);
        if repeats == 0 && observations.len() < 2 {
            // Small budgets: guarantee two sizes if they fit in the total at all.
            let spent = oracle.budget_used() - start;
            if spent + m <= budget {
                repeats = 1;
            }
        }
        if repeats == 0 {
            continue;
        }
        observations.push(sample_std(
            oracle,
            x,
            m,
            repeats,
            settings.reading,
            settings.bias_correction,
        )?);
    }
    let tau_hat = estimate_tau(&observations)?;
    Ok(ProbeResult {
        tau_hat,
        spent: oracle.budget_used() - start,
        observations,
    })
}
