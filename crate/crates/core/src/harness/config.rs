//! Run and matrix configuration files.
//!
//! A run config is a flat TOML table with one nested `[params]` table whose schema depends on
//! `method`. A matrix config lists value sets per axis and expands to their product.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ar::{ArSettings, OffsetRule};
use crate::baselines::{DEFAULT_STAGE_RATIO, DEFAULT_STAGE_REEVALS};
use crate::benchmarks::{BenchmarkFunction, FunctionId};
use crate::error::{Error, Result};
use crate::es::StepSizeCorrection;
use crate::lipschitz::{KernelNoise, DEFAULT_HULL_SAMPLES_PER_DIM};
use crate::noise_probe::{ProbeSettings, StdReading};

/// Noise levels a run may use.
pub const TAU_SQUARED_LEVELS: [f64; 4] = [0.0, 1.0, 10.0, 100.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ar,
    FixedM,
    ThreeStage,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ar, Method::FixedM, Method::ThreeStage];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ar => "ar",
            Method::FixedM => "fixed_m",
            Method::ThreeStage => "three_stage",
        }
    }

    /// Default log decimation: AR iterations are few once `M` grows, the baselines' are not.
    pub fn default_log_every(self) -> u64 {
        match self {
            Method::Ar => 1,
            Method::FixedM | Method::ThreeStage => 10,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetKind {
    #[default]
    Empirical,
    Probabilistic,
}

/// AR parameters, flattened for the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArParams {
    pub alpha: f64,
    pub beta: f64,
    pub m_init: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_cap: Option<u64>,
    pub charge_mean_reeval: bool,
    pub offset: OffsetKind,
    /// Confidence constant for the probabilistic offset.
    pub offset_c: f64,
    pub step_size: StepSizeCorrection,
    pub kernel_noise: KernelNoise,
    pub hull_samples_per_dim: usize,
    pub probe_fraction: f64,
    pub probe_min_budget: u64,
    pub probe_reading: StdReading,
    pub probe_bias_correction: bool,
}

impl Default for ArParams {
    fn default() -> Self {
        let ar = ArSettings::default();
        let probe = ProbeSettings::default();
        Self {
            alpha: ar.alpha,
            beta: ar.beta,
            m_init: ar.m_init,
            m_cap: ar.m_cap,
            charge_mean_reeval: ar.charge_mean_reeval,
            offset: OffsetKind::Empirical,
            offset_c: 3.0,
            step_size: ar.step_size,
            kernel_noise: ar.kernel_noise,
            hull_samples_per_dim: DEFAULT_HULL_SAMPLES_PER_DIM,
            probe_fraction: probe.budget_fraction,
            probe_min_budget: probe.min_budget,
            probe_reading: probe.reading,
            probe_bias_correction: probe.bias_correction,
        }
    }
}

impl ArParams {
    pub fn settings(&self) -> ArSettings {
        ArSettings {
            alpha: self.alpha,
            beta: self.beta,
            m_init: self.m_init,
            m_cap: self.m_cap,
            charge_mean_reeval: self.charge_mean_reeval,
            offset: match self.offset {
                OffsetKind::Empirical => OffsetRule::Empirical,
                OffsetKind::Probabilistic => OffsetRule::Probabilistic { c: self.offset_c },
            },
            step_size: self.step_size,
            kernel_noise: self.kernel_noise,
            hull_samples_per_dim: self.hull_samples_per_dim,
        }
    }

    pub fn probe(&self) -> ProbeSettings {
        ProbeSettings {
            budget_fraction: self.probe_fraction,
            min_budget: self.probe_min_budget,
            reading: self.probe_reading,
            bias_correction: self.probe_bias_correction,
            ..ProbeSettings::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedMParams {
    pub m: u64,
}

impl Default for FixedMParams {
    fn default() -> Self {
        Self { m: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThreeStageParams {
    pub reevals: [u64; 3],
    pub ratio: [u64; 3],
}

impl Default for ThreeStageParams {
    fn default() -> Self {
        Self {
            reevals: DEFAULT_STAGE_REEVALS,
            ratio: DEFAULT_STAGE_RATIO,
        }
    }
}

/// Method-specific parameters; serializes as the bare parameter table.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MethodParams {
    Ar(ArParams),
    FixedM(FixedMParams),
    ThreeStage(ThreeStageParams),
}

impl MethodParams {
    pub fn default_for(method: Method) -> Self {
        match method {
            Method::Ar => MethodParams::Ar(ArParams::default()),
            Method::FixedM => MethodParams::FixedM(FixedMParams::default()),
            Method::ThreeStage => MethodParams::ThreeStage(ThreeStageParams::default()),
        }
    }

    fn parse(method: Method, table: Option<toml::Table>) -> Result<Self> {
        let value = toml::Value::Table(table.unwrap_or_default());
        let wrap = |e: toml::de::Error| Error::config("params", e.message().to_string());
        Ok(match method {
            Method::Ar => MethodParams::Ar(value.try_into().map_err(wrap)?),
            Method::FixedM => MethodParams::FixedM(value.try_into().map_err(wrap)?),
            Method::ThreeStage => MethodParams::ThreeStage(value.try_into().map_err(wrap)?),
        })
    }

    fn method(&self) -> Method {
        match self {
            MethodParams::Ar(_) => Method::Ar,
            MethodParams::FixedM(_) => Method::FixedM,
            MethodParams::ThreeStage(_) => Method::ThreeStage,
        }
    }
}

/// One seeded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRunConfig")]
pub struct RunConfig {
    pub function: FunctionId,
    pub dimension: usize,
    pub tau_squared: f64,
    pub budget_total: u64,
    pub method: Method,
    pub lambda: usize,
    pub mu: usize,
    pub seed: u64,
    /// Where records go. Not part of the run's identity, so records do not echo it.
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    /// Keep every n-th log row; `None` uses the method default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_every: Option<u64>,
    pub params: MethodParams,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunConfig {
    function: FunctionId,
    dimension: usize,
    tau_squared: f64,
    budget_total: u64,
    method: Method,
    #[serde(default = "default_lambda")]
    lambda: usize,
    #[serde(default = "default_mu")]
    mu: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_out_dir")]
    out_dir: PathBuf,
    #[serde(default)]
    log_every: Option<u64>,
    #[serde(default)]
    params: Option<toml::Table>,
}

fn default_lambda() -> usize {
    100
}

fn default_mu() -> usize {
    50
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

impl TryFrom<RawRunConfig> for RunConfig {
    type Error = Error;

    fn try_from(raw: RawRunConfig) -> Result<Self> {
        let config = RunConfig {
            params: MethodParams::parse(raw.method, raw.params)?,
            function: raw.function,
            dimension: raw.dimension,
            tau_squared: raw.tau_squared,
            budget_total: raw.budget_total,
            method: raw.method,
            lambda: raw.lambda,
            mu: raw.mu,
            seed: raw.seed,
            out_dir: raw.out_dir,
            log_every: raw.log_every,
        };
        config.validate()?;
        Ok(config)
    }
}

impl RunConfig {
    /// Defaults for `method` on `function`; budget, noise and seed still need setting.
    pub fn new(function: FunctionId, dimension: usize, method: Method) -> Self {
        Self {
            function,
            dimension,
            tau_squared: 0.0,
            budget_total: 100_000,
            method,
            lambda: default_lambda(),
            mu: default_mu(),
            seed: 0,
            out_dir: default_out_dir(),
            log_every: None,
            params: MethodParams::default_for(method),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawRunConfig =
            toml::from_str(text).map_err(|e| Error::config(toml_path(text, &e), e.message()))?;
        RunConfig::try_from(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn tau(&self) -> f64 {
        self.tau_squared.sqrt()
    }

    pub fn log_every(&self) -> u64 {
        self.log_every.unwrap_or(self.method.default_log_every())
    }

    /// File stem shared by the JSON summary and the CSV trajectory.
    pub fn stem(&self) -> String {
        format!(
            "{}_{}_d{}_t{}_b{}_s{}",
            self.method,
            self.function.name(),
            self.dimension,
            self.tau_squared,
            self.budget_total,
            self.seed
        )
    }

    pub fn validate(&self) -> Result<()> {
        BenchmarkFunction::new(self.function, self.dimension)
            .map_err(|e| Error::config("dimension", e.to_string()))?;
        if !TAU_SQUARED_LEVELS.contains(&self.tau_squared) {
            return Err(Error::config(
                "tau_squared",
                format!("must be one of {TAU_SQUARED_LEVELS:?}, got {}", self.tau_squared),
            ));
        }
        if self.lambda < 2 {
            return Err(Error::config("lambda", "must be >= 2"));
        }
        if self.mu == 0 || self.mu > self.lambda {
            return Err(Error::config("mu", format!("must lie in [1, lambda = {}]", self.lambda)));
        }
        if self.log_every == Some(0) {
            return Err(Error::config("log_every", "must be >= 1"));
        }
        if self.params.method() != self.method {
            return Err(Error::config("params", format!("do not belong to method {}", self.method)));
        }
        match &self.params {
            MethodParams::Ar(p) => {
                p.settings()
                    .validate()
                    .map_err(|e| Error::config("params", e.to_string()))?;
                if !(p.probe_fraction >= 0.0 && p.probe_fraction < 1.0) {
                    return Err(Error::config("params.probe_fraction", "must lie in [0, 1)"));
                }
            }
            MethodParams::FixedM(p) => {
                if p.m == 0 {
                    return Err(Error::config("params.m", "must be >= 1"));
                }
            }
            MethodParams::ThreeStage(p) => {
                if p.reevals.contains(&0) {
                    return Err(Error::config("params.reevals", "entries must be >= 1"));
                }
                if p.ratio.iter().all(|&r| r == 0) {
                    return Err(Error::config("params.ratio", "must not be all zero"));
                }
            }
        }
        Ok(())
    }
}

/// Dotted key path of the line a parse error points at, e.g. `params.alpha`.
fn toml_path(text: &str, e: &toml::de::Error) -> String {
    let Some(span) = e.span() else {
        return "<root>".into();
    };
    let mut section = String::new();
    let mut start = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            section = trimmed.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if span.start < start + line.len() {
            let key = trimmed.split('=').next().unwrap_or("").trim();
            let header = key.is_empty() || trimmed.starts_with('[');
            return match (section.is_empty(), header) {
                (true, true) => "<root>".into(),
                (false, true) => section,
                (true, false) => key.to_string(),
                (false, false) => format!("{section}.{key}"),
            };
        }
        start += line.len();
    }
    "<root>".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    #[default]
    Desk,
}

/// Axes of an experiment; expands to the product of all value lists times `seeds` runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixConfig {
    pub functions: Vec<FunctionId>,
    pub dimensions: Vec<usize>,
    pub tau_squared: Vec<f64>,
    pub budgets: Vec<u64>,
    pub methods: Vec<Method>,
    /// Number of seeds per cell.
    pub seeds: u64,
    /// First seed; cell seeds are `base_seed .. base_seed + seeds`.
    pub base_seed: u64,
    pub lambda: usize,
    pub mu: usize,
    pub out_dir: PathBuf,
    pub ar: ArParams,
    pub fixed_m: FixedMParams,
    pub three_stage: ThreeStageParams,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl MatrixConfig {
    pub fn preset(preset: Preset) -> Self {
        let (dimensions, budgets, seeds) = match preset {
            Preset::Paper => (vec![10, 20], vec![10_000_000, 100_000_000, 1_000_000_000], 20),
            Preset::Desk => (vec![5, 10], vec![100_000, 1_000_000, 10_000_000], 10),
        };
        Self {
            functions: FunctionId::ALL.to_vec(),
            dimensions,
            tau_squared: vec![1.0, 10.0, 100.0],
            budgets,
            methods: Method::ALL.to_vec(),
            seeds,
            base_seed: 0,
            lambda: default_lambda(),
            mu: default_mu(),
            out_dir: default_out_dir(),
            ar: ArParams::default(),
            fixed_m: FixedMParams::default(),
            three_stage: ThreeStageParams::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let matrix: MatrixConfig =
            toml::from_str(text).map_err(|e| Error::config(toml_path(text, &e), e.message()))?;
        matrix.validate()?;
        Ok(matrix)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("functions", self.functions.is_empty()),
            ("dimensions", self.dimensions.is_empty()),
            ("tau_squared", self.tau_squared.is_empty()),
            ("budgets", self.budgets.is_empty()),
            ("methods", self.methods.is_empty()),
            ("seeds", self.seeds == 0),
        ] {
            if empty {
                return Err(Error::config(name, "must not be empty"));
            }
        }
        for config in self.expand() {
            config.validate().map_err(|e| match e {
                Error::Config { path, message } => {
                    Error::config(path, format!("{message} (in {})", config.stem()))
                }
                other => other,
            })?;
        }
        Ok(())
    }

    fn params(&self, method: Method) -> MethodParams {
        match method {
            Method::Ar => MethodParams::Ar(self.ar.clone()),
            Method::FixedM => MethodParams::FixedM(self.fixed_m.clone()),
            Method::ThreeStage => MethodParams::ThreeStage(self.three_stage.clone()),
        }
    }

    /// All runs in a fixed order: method, function, dimension, noise, budget, seed.
    pub fn expand(&self) -> Vec<RunConfig> {
        let mut runs = Vec::new();
        for &method in &self.methods {
            for &function in &self.functions {
                for &dimension in &self.dimensions {
                    for &tau_squared in &self.tau_squared {
                        for &budget_total in &self.budgets {
                            for seed in self.base_seed..self.base_seed + self.seeds {
                                runs.push(RunConfig {
                                    function,
                                    dimension,
                                    tau_squared,
                                    budget_total,
                                    method,
                                    lambda: self.lambda,
                                    mu: self.mu,
                                    seed,
                                    out_dir: self.out_dir.clone(),
                                    log_every: None,
                                    params: self.params(method),
                                });
                            }
                        }
                    }
                }
            }
        }
        runs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
function = "sphere"
dimension = 10
tau_squared = 1
budget_total = 100000
method = "ar"
"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!((c.lambda, c.mu, c.seed), (100, 50, 0));
        assert_eq!(c.params, MethodParams::Ar(ArParams::default()));
        assert_eq!(c.log_every(), 1);
        assert_eq!(c.stem(), "ar_sphere_d10_t1_b100000_s0");
    }

    #[test]
    fn params_follow_the_method() {
        let text = MINIMAL.replace("\"ar\"", "\"fixed_m\"") + "[params]\nm = 7\n";
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.params, MethodParams::FixedM(FixedMParams { m: 7 }));

        let err = RunConfig::from_toml_str(&(MINIMAL.to_string() + "[params]\nm = 7\n"))
            .unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "params"), "{err}");
    }

    #[test]
    fn errors_name_the_field() {
        let bad_tau = MINIMAL.replace("tau_squared = 1", "tau_squared = 2");
        let err = RunConfig::from_toml_str(&bad_tau).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "tau_squared"));

        let bad_alpha = MINIMAL.to_string() + "[params]\nalpha = 1.5\n";
        let err = RunConfig::from_toml_str(&bad_alpha).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");

        let unknown = MINIMAL.to_string() + "colour = 3\n";
        let err = RunConfig::from_toml_str(&unknown).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");

        let wrong_type = MINIMAL.replace("dimension = 10", "dimension = \"ten\"");
        let err = RunConfig::from_toml_str(&wrong_type).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "dimension"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn presets_expand() {
        let desk = MatrixConfig::preset(Preset::Desk);
        desk.validate().unwrap();
        assert_eq!(desk.expand().len(), 3 * 14 * 2 * 3 * 3 * 10);
        let paper = MatrixConfig::preset(Preset::Paper);
        assert_eq!(paper.budgets, vec![10_000_000, 100_000_000, 1_000_000_000]);
        assert_eq!(paper.seeds, 20);

        let small = MatrixConfig::from_toml_str(
            "functions = [\"sphere\"]\ndimensions = [2]\ntau_squared = [0]\nbudgets = [1000]\nseeds = 2\n[fixed_m]\nm = 3\n",
        )
        .unwrap();
        let runs = small.expand();
        assert_eq!(runs.len(), 3 * 2);
        assert_eq!(runs[2].params, MethodParams::FixedM(FixedMParams { m: 3 }));
    }
}
