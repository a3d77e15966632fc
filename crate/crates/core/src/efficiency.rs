//! Frozen-state efficiency experiment.
//!
//! An AR run is stopped at a convergent-phase iteration and its search distribution frozen. For
//! every `M` on a grid, independent single-iteration mutations from that state measure the true
//! improvement of the mean per re-evaluation, which is compared against the lower bound
//! `σ²/(2A²) (b/M - a/M²)` evaluated with the objective's true curvature, gradient and noise
//! level. Trials may read the noiseless objective; the optimizer never does.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ar::{
    bound_coefficients, compute_deltas, efficiency_bound, offset_a, proportional_weights,
    run_ar, ArController, ArSettings, BoundCoefficients,
};
use crate::benchmarks::{BenchmarkFunction, FunctionId, NoisyOracle};
use crate::error::{Error, Result};
use crate::es::{largest_eigenvalue, EsState};
use crate::trace::IterationLog;

/// Which mean shift a trial applies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStep {
    /// The step the bound is derived for, `(1/(2λA)) Σ (Δ_i + A) C^{1/2} ε_i`, with the frozen `A`.
    #[default]
    Analysis,
    /// The optimizer's own step: proportional weights with `A = -min Δ` of the trial.
    Implemented,
}

/// How to reach the frozen state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreezeSpec {
    pub function: FunctionId,
    pub dimension: usize,
    pub tau: f64,
    pub lambda: usize,
    pub iteration: u64,
    /// Further iterations allowed while the bound is degenerate (`b ≤ 0`) at the frozen state.
    pub lookahead: u64,
    pub seed: u64,
    pub settings: ArSettings,
}

impl Default for FreezeSpec {
    fn default() -> Self {
        Self {
            function: FunctionId::Sphere,
            dimension: 10,
            tau: 1.0,
            lambda: 20,
            iteration: 100,
            lookahead: 50,
            seed: 0,
            settings: ArSettings {
                hull_samples_per_dim: 20,
                ..ArSettings::default()
            },
        }
    }
}

/// Snapshot of an AR run plus the quantities the bound needs.
#[derive(Clone, Debug)]
pub struct FrozenState {
    pub state: EsState,
    pub target: BenchmarkFunction,
    pub tau: f64,
    pub iteration: u64,
    /// Re-evaluation count in use when frozen.
    pub m: u64,
    /// Offset `A` logged at the frozen iteration.
    pub offset: f64,
    pub sigma: f64,
    pub s_max: f64,
    /// True curvature constant of the objective.
    pub k: f64,
    /// `‖C^{1/2} ∇L(m)‖²` from the analytic gradient.
    pub grad_norm_sq: f64,
}

/// Scalars of the frozen state, written next to the curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenParams {
    pub function: FunctionId,
    pub dimension: usize,
    pub lambda: usize,
    pub iteration: u64,
    pub m: u64,
    pub tau: f64,
    pub k: f64,
    pub sigma: f64,
    pub s_max: f64,
    #[serde(rename = "A")]
    pub offset: f64,
    pub grad_norm_sq: f64,
    pub a: f64,
    pub b: f64,
}

impl FrozenState {
    pub fn coefficients(&self) -> BoundCoefficients {
        bound_coefficients(
            self.state.dimension(),
            self.k,
            self.s_max,
            self.tau,
            self.state.lambda(),
            self.offset,
            self.sigma,
            self.grad_norm_sq,
        )
    }

    pub fn params(&self) -> FrozenParams {
        let c = self.coefficients();
        FrozenParams {
            function: self.target.id(),
            dimension: self.state.dimension(),
            lambda: self.state.lambda(),
            iteration: self.iteration,
            m: self.m,
            tau: self.tau,
            k: self.k,
            sigma: self.sigma,
            s_max: self.s_max,
            offset: self.offset,
            grad_norm_sq: self.grad_norm_sq,
            a: c.a,
            b: c.b,
        }
    }
}

/// Runs AR-CMA-ES with the true τ for `spec.iteration` iterations and freezes the result.
///
/// If the bound is degenerate there, the run continues one iteration at a time for up to
/// `spec.lookahead` iterations until `b > 0`; the caller sees the final state either way.
pub fn freeze_state(spec: &FreezeSpec) -> Result<FrozenState> {
    let target = BenchmarkFunction::new(spec.function, spec.dimension)?;
    let k = target.gradient_lipschitz().ok_or_else(|| {
        Error::invalid(format!("{} has no known gradient Lipschitz constant", spec.function))
    })?;
    let mut seeds = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut state = EsState::new(target.space(), spec.lambda, spec.lambda / 2, seeds.random())?;
    let budget = u64::MAX / 4;
    let mut oracle = NoisyOracle::new(target.clone(), spec.tau, budget, seeds.random())?;
    let settings = ArSettings {
        m_cap: spec.settings.m_cap.or(Some(10_000)),
        ..spec.settings.clone()
    };
    let mut ctrl =
        ArController::new(settings, spec.dimension, spec.tau, budget, seeds.random())?;
    let trace = run_ar(&mut oracle, &mut state, &mut ctrl, 1, Some(spec.iteration))?;
    if trace.iterations < spec.iteration {
        return Err(Error::invalid(format!(
            "run stopped after {} of {} iterations",
            trace.iterations, spec.iteration
        )));
    }
    let mut last = trace.rows.last().cloned();
    let mut extra = 0;
    loop {
        let row = last.ok_or_else(|| Error::invalid("frozen run completed no iterations"))?;
        let frozen = snapshot(&target, &state, &row, spec.tau, k)?;
        if frozen.coefficients().b > 0.0 || extra >= spec.lookahead {
            return Ok(frozen);
        }
        let step = run_ar(&mut oracle, &mut state, &mut ctrl, 1, Some(1))?;
        if step.iterations == 0 {
            return Ok(frozen);
        }
        last = step.rows.last().cloned();
        extra += 1;
    }
}

fn snapshot(
    target: &BenchmarkFunction,
    state: &EsState,
    row: &IterationLog,
    tau: f64,
    k: f64,
) -> Result<FrozenState> {
    let grad = target
        .gradient(state.mean().as_slice())?
        .ok_or_else(|| Error::invalid("objective has no analytic gradient"))?;
    let g = state.sqrt_cov() * DVector::from_vec(grad);
    Ok(FrozenState {
        sigma: state.sigma(),
        s_max: largest_eigenvalue(state.cov())?,
        offset: row.offset.unwrap_or(0.0),
        m: row.m,
        grad_norm_sq: g.norm_squared(),
        iteration: row.iter,
        tau,
        k,
        target: target.clone(),
        state: state.clone(),
    })
}

/// `n` distinct integers from `lo` to `hi`, as close to log-spaced as integrality allows.
pub fn log_grid(lo: u64, hi: u64, n: usize) -> Result<Vec<u64>> {
    if lo == 0 || hi < lo || n == 0 || (hi - lo + 1) < n as u64 {
        return Err(Error::invalid(format!(
            "cannot place {n} distinct integers in [{lo}, {hi}]"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let ratio = (hi as f64 / lo as f64).ln();
    let mut grid = Vec::with_capacity(n);
    for i in 0..n {
        let ideal = (lo as f64 * (ratio * i as f64 / (n - 1) as f64).exp()).round() as u64;
        let room = hi - (n - 1 - i) as u64;
        let floor = grid.last().map_or(lo, |p: &u64| p + 1);
        grid.push(ideal.max(floor).min(room));
    }
    Ok(grid)
}

/// Pointwise lower bound on the grid.
pub fn theoretical_curve(
    coeffs: BoundCoefficients,
    sigma: f64,
    offset: f64,
    m_grid: &[u64],
) -> Result<Vec<f64>> {
    m_grid
        .iter()
        .map(|&m| efficiency_bound(coeffs, sigma, offset, m as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve {
    pub m_grid: Vec<u64>,
    pub empirical_mean: Vec<f64>,
    pub empirical_se: Vec<f64>,
    pub theoretical: Vec<f64>,
    /// Unconstrained maximizer `2a/b` of the bound.
    pub m_star_theoretical: f64,
    /// `2a/b` clamped to the grid range, the best feasible count the bound recommends.
    pub m_star_feasible: f64,
    pub m_star_empirical: u64,
}

impl EfficiencyCurve {
    /// Grid points where the empirical mean is at least the bound minus `k_se` standard errors.
    pub fn points_above_bound(&self, k_se: f64) -> usize {
        self.empirical_mean
            .iter()
            .zip(&self.empirical_se)
            .zip(&self.theoretical)
            .filter(|((mean, se), bound)| **mean >= **bound - k_se * **se)
            .count()
    }
}

/// True improvement `L(m) - L(m')` of one simulated iteration with `m` re-evaluations.
fn trial_improvement(
    frozen: &FrozenState,
    m: u64,
    step: TrialStep,
    seed: u64,
) -> Result<f64> {
    let mut state = frozen.state.clone();
    state.reseed(seed);
    let mut oracle = NoisyOracle::new(frozen.target.clone(), frozen.tau, u64::MAX / 4, !seed)?;
    let mut candidates = state.sample_population();
    let mean = state.mean().clone();
    compute_deltas(&mut oracle, &mean, &mut candidates, m, true)?;
    let deltas: Vec<f64> = candidates.iter().map(|c| c.delta.unwrap_or(0.0)).collect();
    let lambda = deltas.len() as f64;
    let weights = match step {
        TrialStep::Implemented => proportional_weights(&deltas, offset_a(&deltas)?)?,
        TrialStep::Analysis => deltas
            .iter()
            .map(|d| (d + frozen.offset) / (2.0 * lambda * frozen.offset))
            .collect(),
    };
    let before = frozen.target.evaluate_true(mean.as_slice())?;
    let after = state.recombine_mean(&weights, &candidates)?;
    Ok(before - frozen.target.evaluate_true(after.as_slice())?)
}

/// Empirical efficiency `(L(m) - L(m')) / M` over `trials` mutations per grid point, next to
/// the bound. Fails with [`Error::DegenerateBound`] when `b ≤ 0` at the frozen state.
pub fn simulate_efficiency(
    frozen: &FrozenState,
    m_grid: &[u64],
    trials: usize,
    step: TrialStep,
    seed: u64,
) -> Result<EfficiencyCurve> {
    if trials < 2 {
        return Err(Error::invalid("need at least two trials per grid point"));
    }
    if m_grid.is_empty() || m_grid.contains(&0) {
        return Err(Error::invalid("grid must be non-empty with M >= 1"));
    }
    let coeffs = frozen.coefficients();
    if coeffs.b <= 0.0 {
        return Err(Error::DegenerateBound(format!(
            "b = {:e} at iteration {} (A = {:e}, ‖g‖² = {:e})",
            coeffs.b, frozen.iteration, frozen.offset, frozen.grad_norm_sq
        )));
    }
    let theoretical = theoretical_curve(coeffs, frozen.sigma, frozen.offset, m_grid)?;
    // Common random numbers: trial `t` reuses its seed at every `M`, so the curve's shape is
    // not masked by independent noise between neighbouring grid points.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..trials).map(|_| rng.random()).collect();
    let mut empirical_mean = Vec::with_capacity(m_grid.len());
    let mut empirical_se = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let samples = seeds
            .iter()
            .map(|&s| Ok(trial_improvement(frozen, m, step, s)? / m as f64))
            .collect::<Result<Vec<f64>>>()?;
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        empirical_mean.push(mean);
        empirical_se.push((var / n).sqrt());
    }
    let best = empirical_mean
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let m_star = 2.0 * coeffs.a / coeffs.b;
    let lo = m_grid.iter().copied().min().unwrap_or(1) as f64;
    let hi = m_grid.iter().copied().max().unwrap_or(1) as f64;
    Ok(EfficiencyCurve {
        m_grid: m_grid.to_vec(),
        empirical_mean,
        empirical_se,
        theoretical,
        m_star_theoretical: m_star,
        m_star_feasible: m_star.clamp(lo, hi),
        m_star_empirical: m_grid[best],
    })
}
