//! Adaptive re-evaluation on top of the CMA-ES engine.
//!
//! Every candidate is averaged over `M` noisy draws and recombined with weights proportional to
//! its shifted improvement `Δ_i + A`. The weighted mutations double as a gradient estimate `g`,
//! which together with the noise level τ̂, a curvature estimate K̂ and the covariance's top
//! eigenvalue yields a lower bound on the per-evaluation improvement
//!
//! ```text
//! γ(M) ≥ σ² / (2A²) · (b/M - a/M²)
//! a = d K s_max τ² / (4λ)
//! b = (A - σ²(λ+d+1) K s_max / (4λ)) ‖g‖² - A² d K s_max / (4λ)
//! ```
//!
//! maximized at `M* = 2a/b` when `b > 0`. The printed form of this bound elsewhere carries `+a/M²`
//! and `M* = -2a/b`; both are sign slips, since the noise term can only reduce the improvement
//! and `a > 0`. `M*` is exponentially smoothed and capped before use; when `b ≤ 0` the previous
//! `M` is kept.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::NoisyOracle;
use crate::error::{Error, Result};
use crate::es::{largest_eigenvalue, Candidate, EsState, StepSizeCorrection};
use crate::lipschitz::{estimate_lipschitz, KernelNoise, DEFAULT_HULL_SAMPLES_PER_DIM, K_FLOOR};
use crate::trace::{IterationLog, RowSink, RunTrace, TerminalReason};

/// How the offset `A` is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum OffsetRule {
    /// `A = -min Δ_i`: the worst candidate gets weight zero.
    #[default]
    Empirical,
    /// `A = c τ̂ / √M - σ‖g‖`, raised to `-min Δ_i` if that is not enough to keep every
    /// shifted improvement nonnegative.
    Probabilistic { c: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArSettings {
    /// Gradient smoothing.
    pub alpha: f64,
    /// Re-evaluation smoothing.
    pub beta: f64,
    pub m_init: u64,
    /// Upper clamp for `M`; `None` means 1% of the run budget.
    pub m_cap: Option<u64>,
    /// Charge the `M` draws spent on `L̄(m)` every iteration.
    pub charge_mean_reeval: bool,
    pub offset: OffsetRule,
    pub step_size: StepSizeCorrection,
    pub kernel_noise: KernelNoise,
    pub hull_samples_per_dim: usize,
}

impl Default for ArSettings {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.1,
            m_init: 1,
            m_cap: None,
            charge_mean_reeval: true,
            offset: OffsetRule::Empirical,
            step_size: StepSizeCorrection::HalvedDamping,
            kernel_noise: KernelNoise::StdError,
            hull_samples_per_dim: DEFAULT_HULL_SAMPLES_PER_DIM,
        }
    }
}

impl ArSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.m_init == 0 {
            return Err(Error::invalid("m_init must be >= 1"));
        }
        if self.m_cap == Some(0) {
            return Err(Error::invalid("m_cap must be >= 1"));
        }
        if let OffsetRule::Probabilistic { c } = self.offset {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(format!("offset constant must be > 0, got {c}")));
            }
        }
        if self.hull_samples_per_dim == 0 {
            return Err(Error::invalid("hull_samples_per_dim must be >= 1"));
        }
        Ok(())
    }
}

/// Coefficients of the efficiency lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCoefficients {
    pub a: f64,
    pub b: f64,
}

/// Run-level AR state carried between iterations.
#[derive(Clone, Debug)]
pub struct ArController {
    settings: ArSettings,
    m_smooth: f64,
    m_cap: u64,
    grad_est: DVector<f64>,
    tau_hat: f64,
    k_hat: f64,
    rng: ChaCha8Rng,
}

impl ArController {
    /// `seed` drives the hull sampling of the curvature estimate only.
    pub fn new(
        settings: ArSettings,
        dimension: usize,
        tau_hat: f64,
        budget_total: u64,
        seed: u64,
    ) -> Result<Self> {
        settings.validate()?;
        if !(tau_hat.is_finite() && tau_hat >= 0.0) {
            return Err(Error::invalid(format!("tau_hat must be >= 0, got {tau_hat}")));
        }
        let m_cap = settings.m_cap.unwrap_or((budget_total / 100).max(1));
        Ok(Self {
            m_smooth: (settings.m_init.min(m_cap)) as f64,
            m_cap,
            grad_est: DVector::zeros(dimension),
            tau_hat,
            k_hat: K_FLOOR,
            rng: ChaCha8Rng::seed_from_u64(seed),
            settings,
        })
    }

    pub fn settings(&self) -> &ArSettings {
        &self.settings
    }

    pub fn m_smooth(&self) -> f64 {
        self.m_smooth
    }

    pub fn m_cap(&self) -> u64 {
        self.m_cap
    }

    pub fn grad_est(&self) -> &DVector<f64> {
        &self.grad_est
    }

    pub fn tau_hat(&self) -> f64 {
        self.tau_hat
    }

    pub fn k_hat(&self) -> f64 {
        self.k_hat
    }

    /// Draws per iteration for `m` re-evaluations.
    fn cost(&self, lambda: usize, m: u64) -> u64 {
        let evaluated = lambda as u64 + u64::from(self.settings.charge_mean_reeval);
        evaluated.saturating_mul(m)
    }

    /// Integer `M` for the next iteration: `max(1, round(m_smooth))`, lowered until one
    /// iteration fits `remaining`. `None` when not even `M = 1` fits.
    pub fn evaluation_count(&self, lambda: usize, remaining: u64) -> Option<u64> {
        let wanted = (self.m_smooth.round() as u64).max(1);
        let per_m = self.cost(lambda, 1).max(1);
        let affordable = remaining / per_m;
        (affordable >= 1).then(|| wanted.min(affordable))
    }
}

/// Estimates `L̄(m)` and every candidate's `L̄(x_i)` with `m` draws each and fills `delta`.
///
/// All-or-nothing: if the whole batch does not fit the remaining budget nothing is drawn.
/// With `charge_mean = false` the draws for `L̄(m)` are taken but not billed.
pub fn compute_deltas(
    oracle: &mut NoisyOracle,
    mean: &DVector<f64>,
    candidates: &mut [Candidate],
    m: u64,
    charge_mean: bool,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("re-evaluation count must be >= 1"));
    }
    let needed = (candidates.len() as u64 + u64::from(charge_mean)).saturating_mul(m);
    if needed > oracle.remaining() {
        return Err(Error::BudgetExhausted {
            requested: needed,
            remaining: oracle.remaining(),
        });
    }
    let at_mean = if charge_mean {
        oracle.mean_evaluate(mean.as_slice(), m)?
    } else {
        oracle.mean_evaluate_unmetered(mean.as_slice(), m)?
    };
    for cand in candidates.iter_mut() {
        let value = oracle.mean_evaluate(cand.x.as_slice(), m)?;
        cand.mean_value = Some(value);
        cand.delta = Some(at_mean - value);
    }
    Ok(at_mean)
}

/// `A = -min Δ_i`.
pub fn offset_a(deltas: &[f64]) -> Result<f64> {
    if deltas.len() < 2 {
        return Err(Error::invalid("need at least two improvements"));
    }
    if let Some(d) = deltas.iter().find(|d| !d.is_finite()) {
        return Err(Error::invalid(format!("non-finite improvement {d}")));
    }
    Ok(-deltas.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `w_i = (Δ_i + A) / (Σ Δ_k + λA)`; uniform when the denominator vanishes.
pub fn proportional_weights(deltas: &[f64], offset: f64) -> Result<Vec<f64>> {
    if deltas.is_empty() {
        return Err(Error::invalid("no improvements"));
    }
    let shifted: Vec<f64> = deltas.iter().map(|d| d + offset).collect();
    if let Some(s) = shifted.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::invalid(format!(
            "shifted improvement {s} is negative; offset too small"
        )));
    }
    let total: f64 = shifted.iter().sum();
    if total == 0.0 {
        return Ok(vec![1.0 / deltas.len() as f64; deltas.len()]);
    }
    Ok(shifted.into_iter().map(|s| s / total).collect())
}

/// `g* = -(1 / (λσ²)) Σ (Δ_i + A) ε_i`, an estimate of `C^{1/2} ∇L(m)`.
pub fn gradient_sample(deltas: &[f64], offset: f64, eps: &[&DVector<f64>], sigma: f64) -> DVector<f64> {
    let d = eps.first().map_or(0, |e| e.len());
    let mut g = DVector::zeros(d);
    for (delta, e) in deltas.iter().zip(eps) {
        g.axpy(delta + offset, e, 1.0);
    }
    g * (-1.0 / (deltas.len() as f64 * sigma * sigma))
}

/// `g ← (1 - α) g + α g*`.
pub fn update_gradient_estimate(grad_est: &mut DVector<f64>, sample: &DVector<f64>, alpha: f64) {
    *grad_est *= 1.0 - alpha;
    grad_est.axpy(alpha, sample, 1.0);
}

/// Per-coordinate `E[v_k]` and `E[v_k²]` of `v = (Δ + A) ε` for a linear objective with
/// gradient `g` (in whitened coordinates), `ε ~ σ N(0, I)` and `Δ = -⟨g, ε⟩ + δ`,
/// `δ ~ N(0, τ²/M)`:
///
/// ```text
/// E[v_k]  = -g_k σ²
/// E[v_k²] = τ² σ² / M + (‖g‖² + 2 g_k²) σ⁴ + A² σ²
/// ```
pub fn mutation_moments(
    g: &DVector<f64>,
    sigma: f64,
    tau: f64,
    m: f64,
    offset: f64,
) -> (DVector<f64>, DVector<f64>) {
    let s2 = sigma * sigma;
    let norm_sq = g.norm_squared();
    let mean = g * -s2;
    let second = g.map(|gk| tau * tau * s2 / m + (norm_sq + 2.0 * gk * gk) * s2 * s2 + offset * offset * s2);
    (mean, second)
}

/// Bound coefficients `(a, b)`; see the module docs.
#[allow(clippy::too_many_arguments)]
pub fn bound_coefficients(
    d: usize,
    k_hat: f64,
    s_max: f64,
    tau_hat: f64,
    lambda: usize,
    offset: f64,
    sigma: f64,
    grad_norm_sq: f64,
) -> BoundCoefficients {
    let (d, lambda) = (d as f64, lambda as f64);
    let curvature = k_hat * s_max / (4.0 * lambda);
    let a = d * curvature * tau_hat * tau_hat;
    let b = (offset - sigma * sigma * (lambda + d + 1.0) * curvature) * grad_norm_sq
        - offset * offset * d * curvature;
    BoundCoefficients { a, b }
}

/// `2a/b` when `b > 0`, otherwise `None`.
pub fn optimal_reevaluations(coeffs: BoundCoefficients) -> Option<f64> {
    (coeffs.b > 0.0).then(|| 2.0 * coeffs.a / coeffs.b)
}

/// `M ← clamp((1 - β) M + β M*, 1, cap)`; unchanged without `M*`.
pub fn smooth_m(m_smooth: f64, m_star: Option<f64>, beta: f64, m_cap: u64) -> f64 {
    match m_star {
        Some(target) if target.is_finite() => {
            ((1.0 - beta) * m_smooth + beta * target).clamp(1.0, m_cap as f64)
        }
        _ => m_smooth,
    }
}

/// Value of the lower bound `σ²/(2A²) (b/M - a/M²)`.
pub fn efficiency_bound(coeffs: BoundCoefficients, sigma: f64, offset: f64, m: f64) -> Result<f64> {
    if offset == 0.0 {
        return Err(Error::invalid("offset A must be nonzero"));
    }
    if !(sigma > 0.0 && m > 0.0) {
        return Err(Error::invalid("sigma and M must be positive"));
    }
    Ok(sigma * sigma / (2.0 * offset * offset) * (coeffs.b / m - coeffs.a / (m * m)))
}

/// Outcome of one [`ar_iteration`].
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Completed(IterationLog),
    /// The iteration did not fit the remaining budget; state and controller are untouched.
    Exhausted,
}

/// One full AR-CMA-ES iteration.
pub fn ar_iteration(
    oracle: &mut NoisyOracle,
    state: &mut EsState,
    ctrl: &mut ArController,
) -> Result<Step> {
    let lambda = state.lambda();
    let Some(m) = ctrl.evaluation_count(lambda, oracle.remaining()) else {
        return Ok(Step::Exhausted);
    };

    let mut candidates = state.sample_population();
    let mean = state.mean().clone();
    compute_deltas(
        oracle,
        &mean,
        &mut candidates,
        m,
        ctrl.settings.charge_mean_reeval,
    )?;
    let deltas: Vec<f64> = candidates.iter().map(|c| c.delta.unwrap_or(0.0)).collect();
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::Diverged("non-finite function values".into()));
    }
    let floor_offset = offset_a(&deltas)?;
    let offset = match ctrl.settings.offset {
        OffsetRule::Empirical => floor_offset,
        OffsetRule::Probabilistic { c } => {
            let guess = c * ctrl.tau_hat / (m as f64).sqrt() - state.sigma() * ctrl.grad_est.norm();
            guess.max(floor_offset)
        }
    };
    let weights = proportional_weights(&deltas, offset)?;
    state.recombine_mean(&weights, &candidates)?;
    let s_max = largest_eigenvalue(state.cov())?;

    let inputs: Vec<DVector<f64>> = candidates.iter().map(|c| c.x.clone()).collect();
    let targets: Vec<f64> = candidates.iter().map(|c| c.mean_value.unwrap_or(0.0)).collect();
    let noise = ctrl.settings.kernel_noise.diagonal(ctrl.tau_hat, m);
    // On failure the previous estimate stays in place.
    if let Ok(k) = estimate_lipschitz(
        &inputs,
        &targets,
        noise,
        ctrl.settings.hull_samples_per_dim,
        &mut ctrl.rng,
    ) {
        ctrl.k_hat = k;
    }

    let sigma = state.sigma();
    let eps: Vec<&DVector<f64>> = candidates.iter().map(|c| &c.eps).collect();
    let sample = gradient_sample(&deltas, offset, &eps, sigma);
    update_gradient_estimate(&mut ctrl.grad_est, &sample, ctrl.settings.alpha);

    let coeffs = bound_coefficients(
        state.dimension(),
        ctrl.k_hat,
        s_max,
        ctrl.tau_hat,
        lambda,
        offset,
        sigma,
        ctrl.grad_est.norm_squared(),
    );
    let m_star = optimal_reevaluations(coeffs);
    ctrl.m_smooth = smooth_m(ctrl.m_smooth, m_star, ctrl.settings.beta, ctrl.m_cap);

    state.adapt(&weights, &candidates, ctrl.settings.step_size)?;

    let true_error = oracle.target().error(state.mean().as_slice())?;
    Ok(Step::Completed(IterationLog {
        iter: state.iteration(),
        budget: oracle.budget_used(),
        true_error,
        sigma,
        m,
        s_max,
        k_hat: Some(ctrl.k_hat),
        g_norm: Some(ctrl.grad_est.norm()),
        offset: Some(offset),
        a: Some(coeffs.a),
        b: Some(coeffs.b),
    }))
}

/// Iterates until the budget (or `max_iterations`) runs out, keeping every `log_every`-th row.
pub fn run_ar(
    oracle: &mut NoisyOracle,
    state: &mut EsState,
    ctrl: &mut ArController,
    log_every: u64,
    max_iterations: Option<u64>,
) -> Result<RunTrace> {
    let mut sink = RowSink::new(log_every);
    let mut iterations = 0;
    let terminal = loop {
        if max_iterations.is_some_and(|cap| iterations >= cap) {
            break TerminalReason::MaxIterations;
        }
        match ar_iteration(oracle, state, ctrl) {
            Ok(Step::Completed(row)) => {
                iterations += 1;
                sink.push(row);
            }
            Ok(Step::Exhausted) => break TerminalReason::Budget,
            Err(Error::Diverged(_)) => break TerminalReason::Diverged,
            Err(e) => return Err(e),
        }
    };
    Ok(RunTrace {
        rows: sink.finish(),
        iterations,
        budget_used: oracle.budget_used(),
        final_error: oracle.target().error(state.mean().as_slice())?,
        terminal,
    })
}
