//! Reference noise-handling schedules on the same engine: a fixed re-evaluation count, and a
//! static three-stage schedule. Both recombine with the default top-μ rank weights.

use serde::{Deserialize, Serialize};

use crate::benchmarks::NoisyOracle;
use crate::error::{Error, Result};
use crate::es::{largest_eigenvalue, rank_weights, EsState, StepSizeCorrection};
use crate::trace::{IterationLog, RowSink, RunTrace, TerminalReason};

/// One stage: how many candidates are evaluated, each with `reevals` draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub candidates: u64,
    pub reevals: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub stages: Vec<Stage>,
}

impl StageSchedule {
    pub fn total_candidates(&self) -> u64 {
        self.stages.iter().map(|s| s.candidates).sum()
    }

    pub fn total_evaluations(&self) -> u64 {
        self.stages.iter().map(|s| s.candidates * s.reevals).sum()
    }

    /// Re-evaluation count for the candidate with zero-based index `done`, `None` past the end.
    pub fn reevals_at(&self, done: u64) -> Option<u64> {
        let mut upto = 0;
        for stage in &self.stages {
            upto += stage.candidates;
            if done < upto {
                return Some(stage.reevals);
            }
        }
        None
    }
}

pub const DEFAULT_STAGE_REEVALS: [u64; 3] = [100, 1_000, 10_000];
pub const DEFAULT_STAGE_RATIO: [u64; 3] = [10, 3, 1];

/// Candidate counts `(10u, 3u, u)` with `u = ⌊B / Σ ratio_j · reevals_j⌋`.
///
/// The ratio applies to candidate counts, not evaluations. Budget left over after rounding goes
/// to the last stage as whole extra candidates.
pub fn three_stage_schedule(
    budget_total: u64,
    reevals: [u64; 3],
    ratio: [u64; 3],
) -> Result<StageSchedule> {
    if reevals.contains(&0) {
        return Err(Error::invalid("stage re-evaluation counts must be >= 1"));
    }
    let unit_cost: u64 = reevals.iter().zip(&ratio).map(|(m, r)| m * r).sum();
    if unit_cost == 0 {
        return Err(Error::invalid("stage ratio must not be all zero"));
    }
    let u = budget_total / unit_cost;
    if u == 0 {
        return Err(Error::invalid(format!(
            "budget {budget_total} is below one schedule unit ({unit_cost} evaluations)"
        )));
    }
    let mut stages: Vec<Stage> = reevals
        .iter()
        .zip(&ratio)
        .map(|(&m, &r)| Stage {
            candidates: r * u,
            reevals: m,
        })
        .collect();
    let leftover = budget_total - u * unit_cost;
    stages[2].candidates += leftover / reevals[2];
    Ok(StageSchedule { stages })
}

/// One standard CMA-ES iteration with every candidate averaged over `m` draws.
///
/// `Ok(None)` when `λ·m` no longer fits the remaining budget; nothing is touched then.
pub fn fixed_m_iteration(
    oracle: &mut NoisyOracle,
    state: &mut EsState,
    m: u64,
) -> Result<Option<IterationLog>> {
    if m == 0 {
        return Err(Error::invalid("re-evaluation count must be >= 1"));
    }
    let needed = (state.lambda() as u64).saturating_mul(m);
    if needed > oracle.remaining() {
        return Ok(None);
    }
    let mut candidates = state.sample_population();
    for cand in candidates.iter_mut() {
        cand.mean_value = Some(oracle.mean_evaluate(cand.x.as_slice(), m)?);
    }
    let values: Vec<f64> = candidates.iter().map(|c| c.mean_value.unwrap_or(0.0)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged("non-finite function values".into()));
    }
    let weights = rank_weights(&values, state.mu());
    let sigma = state.sigma();
    state.recombine_mean(&weights, &candidates)?;
    let s_max = largest_eigenvalue(state.cov())?;
    state.adapt(&weights, &candidates, StepSizeCorrection::None)?;
    Ok(Some(IterationLog {
        iter: state.iteration(),
        budget: oracle.budget_used(),
        true_error: oracle.target().error(state.mean().as_slice())?,
        sigma,
        m,
        s_max,
        k_hat: None,
        g_norm: None,
        offset: None,
        a: None,
        b: None,
    }))
}

fn finish(
    oracle: &NoisyOracle,
    state: &EsState,
    sink: RowSink,
    iterations: u64,
    terminal: TerminalReason,
) -> Result<RunTrace> {
    Ok(RunTrace {
        rows: sink.finish(),
        iterations,
        budget_used: oracle.budget_used(),
        final_error: oracle.target().error(state.mean().as_slice())?,
        terminal,
    })
}

/// Fixed-`M` CMA-ES until the budget runs out.
pub fn run_fixed_m(
    oracle: &mut NoisyOracle,
    state: &mut EsState,
    m: u64,
    log_every: u64,
    max_iterations: Option<u64>,
) -> Result<RunTrace> {
    let mut sink = RowSink::new(log_every);
    let mut iterations = 0;
    let terminal = loop {
        if max_iterations.is_some_and(|cap| iterations >= cap) {
            break TerminalReason::MaxIterations;
        }
        match fixed_m_iteration(oracle, state, m) {
            Ok(Some(row)) => {
                iterations += 1;
                sink.push(row);
            }
            Ok(None) => break TerminalReason::Budget,
            Err(Error::Diverged(_)) => break TerminalReason::Diverged,
            Err(e) => return Err(e),
        }
    };
    finish(oracle, state, sink, iterations, terminal)
}

/// Runs the schedule stage by stage. An iteration takes the re-evaluation count of the stage
/// its first candidate falls in; the run stops when the schedule or the budget is used up.
pub fn run_three_stage(
    oracle: &mut NoisyOracle,
    state: &mut EsState,
    schedule: &StageSchedule,
    log_every: u64,
) -> Result<RunTrace> {
    let lambda = state.lambda() as u64;
    let mut sink = RowSink::new(log_every);
    let mut iterations = 0;
    let mut done = 0;
    let terminal = loop {
        let Some(m) = schedule.reevals_at(done) else {
            break TerminalReason::MaxIterations;
        };
        match fixed_m_iteration(oracle, state, m) {
            Ok(Some(row)) => {
                iterations += 1;
                done += lambda;
                sink.push(row);
            }
            Ok(None) => break TerminalReason::Budget,
            Err(Error::Diverged(_)) => break TerminalReason::Diverged,
            Err(e) => return Err(e),
        }
    };
    finish(oracle, state, sink, iterations, terminal)
}
