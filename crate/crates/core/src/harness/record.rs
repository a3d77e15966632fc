//! Executing one run and persisting its record.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ar::{run_ar, ArController};
use crate::baselines::{run_fixed_m, run_three_stage, three_stage_schedule};
use crate::benchmarks::{BenchmarkFunction, NoisyOracle};
use crate::error::{Error, Result};
use crate::es::EsState;
use crate::noise_probe::probe_noise;
use crate::trace::{IterationLog, RunTrace, TerminalReason};

use super::config::{MethodParams, RunConfig};

/// Outcome of the pre-run noise estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub tau_hat: f64,
    pub spent: u64,
}

/// Everything a run produces. On disk the rows go to CSV and the rest to a JSON summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSummary>,
    pub iterations: u64,
    pub budget_used: u64,
    pub final_error: f64,
    pub terminal: TerminalReason,
    #[serde(skip)]
    pub rows: Vec<IterationLog>,
}

/// Independent streams derived from the run seed.
struct SubSeeds {
    strategy: u64,
    oracle: u64,
    controller: u64,
    probe_point: u64,
}

impl SubSeeds {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            strategy: rng.random(),
            oracle: rng.random(),
            controller: rng.random(),
            probe_point: rng.random(),
        }
    }
}

/// Runs the configured method until its budget is spent. Pure: nothing is written.
///
/// For AR the noise probe runs first at a uniform point of the search space and is charged to
/// the same budget. If the budget cannot fit one full iteration the record has zero iterations.
pub fn run(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let target = BenchmarkFunction::new(config.function, config.dimension)?;
    let seeds = SubSeeds::new(config.seed);
    let mut oracle = NoisyOracle::new(target.clone(), config.tau(), config.budget_total, seeds.oracle)?;
    let mut state = EsState::new(target.space(), config.lambda, config.mu, seeds.strategy)?;
    let log_every = config.log_every();
    let mut probe = None;
    let trace = match &config.params {
        MethodParams::Ar(params) => {
            let settings = params.probe();
            let probe_budget = settings.budget_for(config.budget_total).min(oracle.remaining());
            let mut rng = ChaCha8Rng::seed_from_u64(seeds.probe_point);
            let space = target.space();
            let point: Vec<f64> = space
                .lower()
                .iter()
                .zip(space.upper())
                .map(|(lo, hi)| rng.random_range(*lo..=*hi))
                .collect();
            let tau_hat = match probe_noise(&mut oracle, &point, probe_budget, &settings) {
                Ok(result) => {
                    probe = Some(ProbeSummary {
                        tau_hat: result.tau_hat,
                        spent: result.spent,
                    });
                    result.tau_hat
                }
                Err(Error::InvalidArgument(_)) | Err(Error::BudgetExhausted { .. }) => {
                    return empty_record(config, &oracle, &state)
                }
                Err(e) => return Err(e),
            };
            let mut ctrl = ArController::new(
                params.settings(),
                config.dimension,
                tau_hat,
                config.budget_total,
                seeds.controller,
            )?;
            run_ar(&mut oracle, &mut state, &mut ctrl, log_every, None)?
        }
        MethodParams::FixedM(params) => {
            run_fixed_m(&mut oracle, &mut state, params.m, log_every, None)?
        }
        MethodParams::ThreeStage(params) => {
            match three_stage_schedule(config.budget_total, params.reevals, params.ratio) {
                Ok(schedule) => run_three_stage(&mut oracle, &mut state, &schedule, log_every)?,
                Err(Error::InvalidArgument(_)) => return empty_record(config, &oracle, &state),
                Err(e) => return Err(e),
            }
        }
    };
    Ok(record_from_trace(config, probe, trace))
}

fn empty_record(config: &RunConfig, oracle: &NoisyOracle, state: &EsState) -> Result<RunRecord> {
    Ok(RunRecord {
        config: config.clone(),
        probe: None,
        iterations: 0,
        budget_used: oracle.budget_used(),
        final_error: oracle.target().error(state.mean().as_slice())?,
        terminal: TerminalReason::Budget,
        rows: Vec::new(),
    })
}

fn record_from_trace(config: &RunConfig, probe: Option<ProbeSummary>, trace: RunTrace) -> RunRecord {
    RunRecord {
        config: config.clone(),
        probe,
        iterations: trace.iterations,
        budget_used: trace.budget_used,
        final_error: trace.final_error,
        terminal: trace.terminal,
        rows: trace.rows,
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn summary_path(dir: &Path, config: &RunConfig) -> PathBuf {
    dir.join(format!("{}.json", config.stem()))
}

pub fn rows_path(dir: &Path, config: &RunConfig) -> PathBuf {
    dir.join(format!("{}.csv", config.stem()))
}

pub fn rows_to_csv(rows: &[IterationLog]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        writer.write_record(["iter", "budget", "true_error", "sigma", "M", "s_max", "k_hat", "g_norm", "A", "a", "b"])?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Io(e.into_error()))
}

/// Writes the JSON summary and the CSV trajectory into `dir`; returns the summary path.
pub fn write_record(record: &RunRecord, dir: &Path) -> Result<PathBuf> {
    let summary = summary_path(dir, &record.config);
    write_atomic(&rows_path(dir, &record.config), &rows_to_csv(&record.rows)?)?;
    let mut json = serde_json::to_vec_pretty(record)?;
    json.push(b'\n');
    write_atomic(&summary, &json)?;
    Ok(summary)
}

/// Reads a JSON summary; the trajectory is left empty.
pub fn read_summary(path: &Path) -> Result<RunRecord> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub fn read_rows(path: &Path) -> Result<Vec<IterationLog>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
