//! Smooth and non-smooth test functions with their search boxes and known optima.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]` used to draw the initial mean and the initial step size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("search space must have dimension >= 1"));
        }
        if lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "bound lengths differ: {} lower vs {} upper",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "degenerate bound in coordinate {i}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, d: usize) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// `max_i (upper_i - lower_i)`.
    pub fn max_width(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }
}

/// Names of the available benchmark functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionId {
    Sphere,
    Ellipsoid,
    RotatedEllipsoid,
    HyperEllipsoid,
    RotatedHyperEllipsoid,
    Rastrigin,
    Trid,
    CosineMixture,
    Bohachevsky,
    Schwefel02,
    SumAbsolute,
    NesterovF1,
    NesterovF2,
    GriewankNonsmooth,
}

impl FunctionId {
    pub const ALL: [FunctionId; 14] = [
        FunctionId::Sphere,
        FunctionId::Ellipsoid,
        FunctionId::RotatedEllipsoid,
        FunctionId::HyperEllipsoid,
        FunctionId::RotatedHyperEllipsoid,
        FunctionId::Rastrigin,
        FunctionId::Trid,
        FunctionId::CosineMixture,
        FunctionId::Bohachevsky,
        FunctionId::Schwefel02,
        FunctionId::SumAbsolute,
        FunctionId::NesterovF1,
        FunctionId::NesterovF2,
        FunctionId::GriewankNonsmooth,
    ];

    /// The ten functions with a Lipschitz-continuous gradient.
    pub const SMOOTH: [FunctionId; 10] = [
        FunctionId::Sphere,
        FunctionId::Ellipsoid,
        FunctionId::RotatedEllipsoid,
        FunctionId::HyperEllipsoid,
        FunctionId::RotatedHyperEllipsoid,
        FunctionId::Rastrigin,
        FunctionId::Trid,
        FunctionId::CosineMixture,
        FunctionId::Bohachevsky,
        FunctionId::Schwefel02,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionId::Sphere => "sphere",
            FunctionId::Ellipsoid => "ellipsoid",
            FunctionId::RotatedEllipsoid => "rotated_ellipsoid",
            FunctionId::HyperEllipsoid => "hyper_ellipsoid",
            FunctionId::RotatedHyperEllipsoid => "rotated_hyper_ellipsoid",
            FunctionId::Rastrigin => "rastrigin",
            FunctionId::Trid => "trid",
            FunctionId::CosineMixture => "cosine_mixture",
            FunctionId::Bohachevsky => "bohachevsky",
            FunctionId::Schwefel02 => "schwefel02",
            FunctionId::SumAbsolute => "sum_absolute",
            FunctionId::NesterovF1 => "nesterov_f1",
            FunctionId::NesterovF2 => "nesterov_f2",
            FunctionId::GriewankNonsmooth => "griewank_nonsmooth",
        }
    }

    pub fn is_smooth(self) -> bool {
        Self::SMOOTH.contains(&self)
    }

    fn min_dimension(self) -> usize {
        match self {
            FunctionId::Trid | FunctionId::Bohachevsky | FunctionId::Schwefel02 => 2,
            _ => 1,
        }
    }

    fn check_dimension(self, d: usize) -> Result<()> {
        if d < self.min_dimension() {
            return Err(Error::invalid(format!(
                "{} requires dimension >= {}, got {d}",
                self.name(),
                self.min_dimension()
            )));
        }
        Ok(())
    }

    /// Global optimum value `L*` in dimension `d`.
    pub fn optimum_value(self, d: usize) -> Result<f64> {
        self.check_dimension(d)?;
        let d_f = d as f64;
        Ok(match self {
            FunctionId::CosineMixture => -0.1 * d_f,
            FunctionId::Trid => -d_f * (d_f + 4.0) * (d_f - 1.0) / 6.0,
            _ => 0.0,
        })
    }

    /// A point attaining [`optimum_value`](Self::optimum_value).
    pub fn minimizer(self, d: usize) -> Result<Vec<f64>> {
        self.check_dimension(d)?;
        Ok(match self {
            FunctionId::Trid => (1..=d).map(|i| (i * (d + 1 - i)) as f64).collect(),
            FunctionId::NesterovF1 | FunctionId::NesterovF2 => vec![1.0; d],
            _ => vec![0.0; d],
        })
    }

    pub fn search_space(self, d: usize) -> Result<SearchSpace> {
        self.check_dimension(d)?;
        let (lo, hi) = match self {
            FunctionId::Sphere
            | FunctionId::Ellipsoid
            | FunctionId::RotatedEllipsoid
            | FunctionId::HyperEllipsoid
            | FunctionId::RotatedHyperEllipsoid
            | FunctionId::Rastrigin => (-5.0, 5.0),
            FunctionId::Trid => {
                let r = (d * d) as f64;
                (-r, r)
            }
            FunctionId::CosineMixture
            | FunctionId::SumAbsolute
            | FunctionId::NesterovF1
            | FunctionId::NesterovF2
            | FunctionId::GriewankNonsmooth => (-1.0, 1.0),
            FunctionId::Bohachevsky => (-15.0, 15.0),
            FunctionId::Schwefel02 => (-10.0, 10.0),
        };
        SearchSpace::cube(lo, hi, d)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown function id `{s}`")))
    }
}

/// Diagonal weight `100^{(i-1)/(d-1)}` for 0-based index `i`; 1 when `d == 1`.
fn ellipsoid_weight(i: usize, d: usize) -> f64 {
    if d == 1 {
        1.0
    } else {
        100f64.powf(i as f64 / (d - 1) as f64)
    }
}

/// A benchmark function instantiated in a fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkFunction {
    id: FunctionId,
    dimension: usize,
    space: SearchSpace,
    optimum_value: f64,
}

impl BenchmarkFunction {
    pub fn new(id: FunctionId, dimension: usize) -> Result<Self> {
        Ok(Self {
            id,
            dimension,
            space: id.search_space(dimension)?,
            optimum_value: id.optimum_value(dimension)?,
        })
    }

    pub fn id(&self) -> FunctionId {
        self.id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn optimum_value(&self) -> f64 {
        self.optimum_value
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::invalid(format!(
                "{} expects {} coordinates, got {}",
                self.id,
                self.dimension,
                x.len()
            )));
        }
        Ok(())
    }

    /// Noiseless objective value. Defined on all of R^d.
    pub fn evaluate_true(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.value(x))
    }

    /// `evaluate_true(x) - L*`.
    pub fn error(&self, x: &[f64]) -> Result<f64> {
        Ok(self.evaluate_true(x)? - self.optimum_value)
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let d = x.len();
        match self.id {
            FunctionId::Sphere => x.iter().map(|v| v * v).sum(),
            FunctionId::Ellipsoid => x
                .iter()
                .enumerate()
                .map(|(i, v)| ellipsoid_weight(i, d) * v * v)
                .sum(),
            FunctionId::RotatedEllipsoid => x
                .iter()
                .enumerate()
                .map(|(i, v)| ellipsoid_weight(d - 1 - i, d) * v * v)
                .sum(),
            FunctionId::HyperEllipsoid => x
                .iter()
                .enumerate()
                .map(|(i, v)| (i + 1) as f64 * v * v)
                .sum(),
            FunctionId::RotatedHyperEllipsoid => x
                .iter()
                .enumerate()
                .map(|(i, v)| (d - i) as f64 * v * v)
                .sum(),
            FunctionId::Rastrigin => {
                10.0 * d as f64
                    + x.iter()
                        .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
                        .sum::<f64>()
            }
            FunctionId::Trid => {
                let squares: f64 = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
                let cross: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
                squares - cross
            }
            FunctionId::CosineMixture => x
                .iter()
                .map(|v| v * v - 0.1 * (5.0 * PI * v).cos())
                .sum(),
            FunctionId::Bohachevsky => x
                .windows(2)
                .map(|w| {
                    w[0] * w[0] + 2.0 * w[1] * w[1] - 0.3 * (3.0 * PI * w[0]).cos()
                        - 0.4 * (4.0 * PI * w[1]).cos()
                        + 0.7
                })
                .sum(),
            FunctionId::Schwefel02 => {
                let mut prefix = 0.0;
                let mut total = 0.0;
                for v in x {
                    prefix += v;
                    total += prefix * prefix;
                }
                total
            }
            FunctionId::SumAbsolute => x.iter().map(|v| v.abs()).sum(),
            FunctionId::NesterovF1 => {
                0.25 * (x[0] - 1.0).powi(2)
                    + x.windows(2)
                        .map(|w| (w[1] - 2.0 * w[0] * w[0] + 1.0).abs())
                        .sum::<f64>()
            }
            FunctionId::NesterovF2 => {
                0.25 * (x[0] - 1.0).abs()
                    + x.windows(2)
                        .map(|w| (w[1] - 2.0 * w[0].abs() + 1.0).abs())
                        .sum::<f64>()
            }
            FunctionId::GriewankNonsmooth => {
                let quad: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
                let prod: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let u = v / (2.0 * ((i + 1) as f64).sqrt());
                        u.cos().abs() - u.sin().abs()
                    })
                    .product();
                1.0 + quad - prod
            }
        }
    }

    /// Analytic gradient, available for the smooth functions only.
    pub fn gradient(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        self.check_len(x)?;
        let d = x.len();
        let grad = match self.id {
            FunctionId::Sphere => x.iter().map(|v| 2.0 * v).collect(),
            FunctionId::Ellipsoid => (0..d)
                .map(|i| 2.0 * ellipsoid_weight(i, d) * x[i])
                .collect(),
            FunctionId::RotatedEllipsoid => (0..d)
                .map(|i| 2.0 * ellipsoid_weight(d - 1 - i, d) * x[i])
                .collect(),
            FunctionId::HyperEllipsoid => (0..d).map(|i| 2.0 * (i + 1) as f64 * x[i]).collect(),
            FunctionId::RotatedHyperEllipsoid => {
                (0..d).map(|i| 2.0 * (d - i) as f64 * x[i]).collect()
            }
            FunctionId::Rastrigin => x
                .iter()
                .map(|v| 2.0 * v + 20.0 * PI * (2.0 * PI * v).sin())
                .collect(),
            FunctionId::Trid => (0..d)
                .map(|i| {
                    let left = if i > 0 { x[i - 1] } else { 0.0 };
                    let right = if i + 1 < d { x[i + 1] } else { 0.0 };
                    2.0 * (x[i] - 1.0) - left - right
                })
                .collect(),
            FunctionId::CosineMixture => x
                .iter()
                .map(|v| 2.0 * v + 0.5 * PI * (5.0 * PI * v).sin())
                .collect(),
            FunctionId::Bohachevsky => {
                let mut g = vec![0.0; d];
                for i in 0..d - 1 {
                    g[i] += 2.0 * x[i] + 0.9 * PI * (3.0 * PI * x[i]).sin();
                    g[i + 1] += 4.0 * x[i + 1] + 1.6 * PI * (4.0 * PI * x[i + 1]).sin();
                }
                g
            }
            FunctionId::Schwefel02 => {
                let prefix: Vec<f64> = x
                    .iter()
                    .scan(0.0, |acc, v| {
                        *acc += v;
                        Some(*acc)
                    })
                    .collect();
                // d/dx_j sum_i (S_i)^2 = 2 sum_{i >= j} S_i
                let mut g = vec![0.0; d];
                let mut tail = 0.0;
                for j in (0..d).rev() {
                    tail += prefix[j];
                    g[j] = 2.0 * tail;
                }
                g
            }
            _ => return Ok(None),
        };
        Ok(Some(grad))
    }

    /// Lipschitz constant of the gradient for the quadratic functions (the spectral norm of
    /// their constant Hessian). `None` where no closed form is provided.
    pub fn gradient_lipschitz(&self) -> Option<f64> {
        let d = self.dimension as f64;
        match self.id {
            FunctionId::Sphere => Some(2.0),
            FunctionId::Ellipsoid | FunctionId::RotatedEllipsoid => {
                Some(if self.dimension == 1 { 2.0 } else { 200.0 })
            }
            FunctionId::HyperEllipsoid | FunctionId::RotatedHyperEllipsoid => Some(2.0 * d),
            // Hessian 2I - (sub + super diagonal): eigenvalues 2 - 2cos(k pi / (d + 1)).
            FunctionId::Trid => Some(2.0 + 2.0 * (PI / (d + 1.0)).cos()),
            _ => None,
        }
    }
}
