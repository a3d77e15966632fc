//! Config and output files of the frozen-state efficiency experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::efficiency::{
    freeze_state, log_grid, simulate_efficiency, EfficiencyCurve, FreezeSpec, FrozenParams,
    TrialStep,
};
use crate::error::{Error, Result};

use super::record::write_atomic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencyConfig {
    pub freeze: FreezeSpec,
    pub grid_min: u64,
    pub grid_max: u64,
    pub grid_points: usize,
    pub trials: usize,
    pub step: TrialStep,
    /// Seed of the trial streams; the frozen run uses `freeze.seed`.
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        Self {
            freeze: FreezeSpec::default(),
            grid_min: 1,
            grid_max: 200,
            grid_points: 40,
            trials: 50,
            step: TrialStep::Analysis,
            seed: 0,
            out_dir: PathBuf::from("results"),
        }
    }
}

impl EfficiencyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("efficiency", e.message()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        log_grid(self.grid_min, self.grid_max, self.grid_points)
            .map_err(|e| Error::config("grid_points", e.to_string()))?;
        if self.trials < 2 {
            return Err(Error::config("trials", "must be >= 2"));
        }
        if !(self.freeze.tau.is_finite() && self.freeze.tau >= 0.0) {
            return Err(Error::config("freeze.tau", "must be finite and >= 0"));
        }
        self.freeze
            .settings
            .validate()
            .map_err(|e| Error::config("freeze.settings", e.to_string()))
    }
}

/// The curve plus the frozen-state scalars that produced the bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub frozen: FrozenParams,
    pub curve: EfficiencyCurve,
}

pub fn run_efficiency(config: &EfficiencyConfig) -> Result<EfficiencyReport> {
    config.validate()?;
    let grid = log_grid(config.grid_min, config.grid_max, config.grid_points)?;
    let frozen = freeze_state(&config.freeze)?;
    let curve = simulate_efficiency(&frozen, &grid, config.trials, config.step, config.seed)?;
    Ok(EfficiencyReport {
        frozen: frozen.params(),
        curve,
    })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    frozen: &'a FrozenParams,
    trials: usize,
    step: TrialStep,
    m_star_theoretical: f64,
    m_star_feasible: f64,
    m_star_empirical: u64,
}

/// Writes `efficiency.csv` (m, empirical_mean, empirical_se, theoretical) and the JSON sidecar
/// `efficiency.json` into `dir`.
pub fn write_efficiency(
    report: &EfficiencyReport,
    config: &EfficiencyConfig,
    dir: &Path,
) -> Result<[PathBuf; 2]> {
    let c = &report.curve;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["m", "empirical_mean", "empirical_se", "theoretical"])?;
    for i in 0..c.m_grid.len() {
        writer.serialize((c.m_grid[i], c.empirical_mean[i], c.empirical_se[i], c.theoretical[i]))?;
    }
    let csv_bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let sidecar = Sidecar {
        frozen: &report.frozen,
        trials: config.trials,
        step: config.step,
        m_star_theoretical: c.m_star_theoretical,
        m_star_feasible: c.m_star_feasible,
        m_star_empirical: c.m_star_empirical,
    };
    let mut json = serde_json::to_vec_pretty(&sidecar)?;
    json.push(b'\n');
    let paths = [dir.join("efficiency.csv"), dir.join("efficiency.json")];
    write_atomic(&paths[0], &csv_bytes)?;
    write_atomic(&paths[1], &json)?;
    Ok(paths)
}
