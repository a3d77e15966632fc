//! Empirical distribution of final errors and per-cell summaries.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::benchmarks::FunctionId;
use crate::error::{Error, Result};

use super::config::{Method, RunConfig};
use super::record::{read_summary, summary_path, write_atomic};

/// `ECDF(x) = #{i : e_i ≤ x} / N` at the sorted unique errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    pub errors: Vec<f64>,
    pub fractions: Vec<f64>,
}

impl EcdfCurve {
    /// Fraction of runs with error at most `x`.
    pub fn at(&self, x: f64) -> f64 {
        let k = self.errors.partition_point(|e| *e <= x);
        if k == 0 {
            0.0
        } else {
            self.fractions[k - 1]
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["error", "fraction"])?;
        for (e, f) in self.errors.iter().zip(&self.fractions) {
            writer.serialize((e, f))?;
        }
        writer.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn compute_ecdf(final_errors: &[f64]) -> Result<EcdfCurve> {
    if final_errors.is_empty() {
        return Err(Error::invalid("ECDF needs at least one error"));
    }
    if final_errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("ECDF errors must be finite"));
    }
    let mut sorted = final_errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut errors: Vec<f64> = Vec::new();
    let mut fractions: Vec<f64> = Vec::new();
    for (i, e) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        if errors.last() == Some(e) {
            *fractions.last_mut().expect("parallel vectors") = fraction;
        } else {
            errors.push(*e);
            fractions.push(fraction);
        }
    }
    Ok(EcdfCurve { errors, fractions })
}

/// A (method, function, dimension, noise, budget) combination; seeds are pooled. `τ²` is kept
/// as its bit pattern so the key is `Ord`.
type CellKey = (Method, FunctionId, usize, u64, u64);

fn cell_key(config: &RunConfig) -> CellKey {
    (
        config.method,
        config.function,
        config.dimension,
        config.tau_squared.to_bits(),
        config.budget_total,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub function: FunctionId,
    pub dimension: usize,
    pub tau_squared: f64,
    pub budget: u64,
    pub runs: usize,
    pub mean: f64,
    /// Standard error of the mean; 0 for a single run.
    pub se: f64,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub cells: Vec<CellSummary>,
    /// One ECDF per method over every run of that method.
    pub ecdfs: BTreeMap<Method, EcdfCurve>,
    /// Expected summaries that could not be read.
    pub missing: Vec<PathBuf>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Summarizes final errors per cell from `(config, final_error)` pairs.
pub fn summarize(results: &[(RunConfig, f64)]) -> Result<(Vec<CellSummary>, BTreeMap<Method, EcdfCurve>)> {
    let mut cells: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    let mut by_method: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for (config, error) in results {
        cells.entry(cell_key(config)).or_default().push(*error);
        by_method.entry(config.method).or_default().push(*error);
    }
    let cells = cells
        .into_iter()
        .map(|((method, function, dimension, tau_bits, budget), mut errors)| {
            errors.sort_by(f64::total_cmp);
            let n = errors.len() as f64;
            let mean = errors.iter().sum::<f64>() / n;
            let se = if errors.len() > 1 {
                (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            CellSummary {
                method,
                function,
                dimension,
                tau_squared: f64::from_bits(tau_bits),
                budget,
                runs: errors.len(),
                median: median(&errors),
                mean,
                se,
            }
        })
        .collect();
    let ecdfs = by_method
        .into_iter()
        .map(|(method, errors)| Ok((method, compute_ecdf(&errors)?)))
        .collect::<Result<_>>()?;
    Ok((cells, ecdfs))
}

/// Reads the records the matrix should have produced in `dir` and summarizes them. Records
/// that are missing or unreadable are listed rather than treated as errors.
pub fn compare(configs: &[RunConfig], dir: &Path) -> Result<Comparison> {
    let mut results = Vec::new();
    let mut missing = Vec::new();
    for config in configs {
        let path = summary_path(dir, config);
        match read_summary(&path) {
            Ok(record) => results.push((config.clone(), record.final_error)),
            Err(_) => missing.push(path),
        }
    }
    if results.is_empty() {
        return Ok(Comparison {
            cells: Vec::new(),
            ecdfs: BTreeMap::new(),
            missing,
        });
    }
    let (cells, ecdfs) = summarize(&results)?;
    Ok(Comparison {
        cells,
        ecdfs,
        missing,
    })
}

/// `(config, final_error)` per readable record.
pub type FinalErrors = Vec<(RunConfig, f64)>;

/// Reads every JSON summary directly inside `dir`, in file-name order. Unreadable files are
/// returned separately.
pub fn collect_records(dir: &Path) -> Result<(FinalErrors, Vec<PathBuf>)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    let mut results = Vec::new();
    let mut unreadable = Vec::new();
    for path in paths {
        match read_summary(&path) {
            Ok(record) => results.push((record.config, record.final_error)),
            Err(_) => unreadable.push(path),
        }
    }
    Ok((results, unreadable))
}

/// Writes `summary.csv` and one `ecdf_<method>.csv` per method into `dir`.
pub fn write_comparison(
    cells: &[CellSummary],
    ecdfs: &BTreeMap<Method, EcdfCurve>,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for cell in cells {
        writer.serialize(cell)?;
    }
    if cells.is_empty() {
        writer.write_record([
            "method", "function", "dimension", "tau_squared", "budget", "runs", "mean", "se", "median",
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let summary = dir.join("summary.csv");
    write_atomic(&summary, &bytes)?;
    let mut written = vec![summary];
    for (method, curve) in ecdfs {
        let path = dir.join(format!("ecdf_{method}.csv"));
        write_atomic(&path, &curve.to_csv()?)?;
        written.push(path);
    }
    Ok(written)
}
