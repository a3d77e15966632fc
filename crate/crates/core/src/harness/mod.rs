//! Configuration-driven experiment runner: seeded runs, matrix execution, ECDFs and summaries.

mod config;
mod ecdf;
mod lab;
mod record;

pub use config::{
    ArParams, FixedMParams, MatrixConfig, Method, MethodParams, OffsetKind, Preset, RunConfig,
    ThreeStageParams, TAU_SQUARED_LEVELS,
};
pub use ecdf::{
    collect_records, compare, compute_ecdf, summarize, write_comparison, CellSummary, Comparison,
    EcdfCurve,
};
pub use lab::{run_efficiency, write_efficiency, EfficiencyConfig, EfficiencyReport};
pub use record::{
    read_rows, read_summary, rows_path, rows_to_csv, run, summary_path, write_atomic,
    write_record, ProbeSummary, RunRecord,
};

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Result of one matrix entry: the summary path, or the error that stopped it.
pub type JobOutcome = (RunConfig, Result<PathBuf>);

/// Runs every config on a pool of `workers` threads and writes each record into `dir`.
///
/// Outcomes come back in input order. A failed run does not stop the others.
pub fn execute(configs: &[RunConfig], dir: &Path, workers: usize) -> Result<Vec<JobOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        configs
            .par_iter()
            .map(|config| {
                let outcome = run(config).and_then(|record| write_record(&record, dir));
                (config.clone(), outcome)
            })
            .collect()
    }))
}
