//! Per-iteration log rows and run outcomes shared by every method.

use serde::{Deserialize, Serialize};

/// One trajectory row. AR-only quantities are `None` for the baselines and serialize as empty
/// CSV cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: u64,
    /// Evaluations charged so far, probe included.
    pub budget: u64,
    /// `L(m) - L*` at the mean after the iteration; never charged.
    pub true_error: f64,
    pub sigma: f64,
    /// Re-evaluations per candidate used in this iteration.
    #[serde(rename = "M")]
    pub m: u64,
    pub s_max: f64,
    pub k_hat: Option<f64>,
    pub g_norm: Option<f64>,
    #[serde(rename = "A")]
    pub offset: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    /// The next iteration no longer fits the remaining budget.
    Budget,
    /// The iteration cap was reached first.
    MaxIterations,
    /// Step size or covariance left the finite range.
    Diverged,
}

/// Trajectory of one optimization run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<IterationLog>,
    pub iterations: u64,
    pub budget_used: u64,
    pub final_error: f64,
    pub terminal: TerminalReason,
}

/// Row decimation: keeps iterations `1, 1 + every, ...` and always the last one.
#[derive(Clone, Debug)]
pub(crate) struct RowSink {
    every: u64,
    rows: Vec<IterationLog>,
    pending: Option<IterationLog>,
}

impl RowSink {
    pub(crate) fn new(every: u64) -> Self {
        Self {
            every: every.max(1),
            rows: Vec::new(),
            pending: None,
        }
    }

    pub(crate) fn push(&mut self, row: IterationLog) {
        if (row.iter - 1).is_multiple_of(self.every) {
            self.rows.push(row);
            self.pending = None;
        } else {
            self.pending = Some(row);
        }
    }

    pub(crate) fn finish(mut self) -> Vec<IterationLog> {
        self.rows.extend(self.pending);
        self.rows
    }
}
