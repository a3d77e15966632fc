//! Lipschitz constant of the gradient, estimated from a Gaussian-process surrogate fitted to
//! one population.
//!
//! The surrogate uses a zero prior mean (targets are centered first) and the kernel
//! `k(x, x') = exp(-θ ‖x - x'‖²) + s · 1{x = x'}`. The estimate is the largest spectral norm of
//! the posterior-mean Hessian over query points inside the population's convex hull.
//!
//! Two approximations are made and should be kept in mind when reading `K̂`:
//!
//! - θ comes from the median heuristic rather than marginal-likelihood optimization.
//! - Hull queries are flat-Dirichlet combinations of the population. They always lie inside
//!   the hull but are not uniform over its volume; they concentrate around the centroid.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every estimate.
pub const K_FLOOR: f64 = 1e-12;

/// Query points drawn per dimension inside the hull.
pub const DEFAULT_HULL_SAMPLES_PER_DIM: usize = 100;

/// Which white-noise level goes on the kernel diagonal for `M`-sample means.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelNoise {
    /// `τ / √M`, the standard error of the mean.
    #[default]
    StdError,
    /// `τ² / M`, the variance of the mean.
    Variance,
}

impl KernelNoise {
    pub fn diagonal(self, tau: f64, m: u64) -> f64 {
        let m = m.max(1) as f64;
        match self {
            KernelNoise::StdError => tau / m.sqrt(),
            KernelNoise::Variance => tau * tau / m,
        }
    }
}

/// Median heuristic: `θ = 1 / (2 median²)` over pairwise distances, `1` if all points coincide.
pub fn select_bandwidth(inputs: &[DVector<f64>]) -> Result<f64> {
    if inputs.len() < 2 {
        return Err(Error::invalid("bandwidth selection needs at least 2 points"));
    }
    let mut dists = Vec::with_capacity(inputs.len() * (inputs.len() - 1) / 2);
    for (i, a) in inputs.iter().enumerate() {
        for b in &inputs[i + 1..] {
            dists.push((a - b).norm());
        }
    }
    dists.sort_by(f64::total_cmp);
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    if median > 0.0 && median.is_finite() {
        Ok(1.0 / (2.0 * median * median))
    } else {
        Ok(1.0)
    }
}

/// Fitted Gaussian-process surrogate.
#[derive(Clone, Debug)]
pub struct GpModel {
    inputs: Vec<DVector<f64>>,
    targets: DVector<f64>,
    offset: f64,
    theta: f64,
    noise_diag: f64,
    jitter: f64,
    weights: DVector<f64>,
}

impl GpModel {
    /// Fits with the median-heuristic bandwidth.
    pub fn fit(inputs: &[DVector<f64>], targets: &[f64], noise_diag: f64) -> Result<Self> {
        let theta = if inputs.len() >= 2 {
            select_bandwidth(inputs)?
        } else {
            1.0
        };
        Self::fit_with_bandwidth(inputs, targets, theta, noise_diag)
    }

    /// Solves `(G + noise_diag I) w = y - ȳ`, escalating a diagonal jitter from `1e-10` to
    /// `1e-4` when the Cholesky factorization fails.
    pub fn fit_with_bandwidth(
        inputs: &[DVector<f64>],
        targets: &[f64],
        theta: f64,
        noise_diag: f64,
    ) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::invalid(format!(
                "{} inputs for {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {theta}")));
        }
        if !(noise_diag.is_finite() && noise_diag >= 0.0) {
            return Err(Error::invalid(format!("noise term must be >= 0, got {noise_diag}")));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::EstimationFailed("non-finite target".into()));
        }
        let n = inputs.len();
        let offset = targets.iter().sum::<f64>() / n as f64;
        let centered = DVector::from_iterator(n, targets.iter().map(|t| t - offset));
        let gram = DMatrix::from_fn(n, n, |i, j| {
            (-theta * (&inputs[i] - &inputs[j]).norm_squared()).exp()
        });

        let mut jitter = 0.0;
        loop {
            let mut k = gram.clone();
            for i in 0..n {
                k[(i, i)] += noise_diag + jitter;
            }
            if let Some(chol) = Cholesky::new(k) {
                let weights = chol.solve(&centered);
                if weights.iter().all(|w| w.is_finite()) {
                    return Ok(Self {
                        inputs: inputs.to_vec(),
                        targets: centered,
                        offset,
                        theta,
                        noise_diag,
                        jitter,
                        weights,
                    });
                }
            }
            jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
            if jitter > 1e-4 * (1.0 + 1e-9) {
                return Err(Error::EstimationFailed(
                    "kernel matrix stays singular after jitter escalation".into(),
                ));
            }
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn noise_diag(&self) -> f64 {
        self.noise_diag
    }
    /// Diagonal jitter that had to be added on top of `noise_diag`.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }
    /// Mean-centered training targets.
    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }
    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    /// Posterior mean including the subtracted target mean.
    pub fn posterior_mean(&self, x: &DVector<f64>) -> f64 {
        self.offset
            + self
                .inputs
                .iter()
                .zip(self.weights.iter())
                .map(|(xi, w)| w * (-self.theta * (x - xi).norm_squared()).exp())
                .sum::<f64>()
    }

    /// `H(x) = Σ_i w_i k(x, x_i) (4θ² r_i r_iᵀ - 2θ I)` with `r_i = x - x_i`.
    pub fn posterior_mean_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = x.len();
        let mut outer = DMatrix::zeros(d, d);
        let mut diag = 0.0;
        let four_theta_sq = 4.0 * self.theta * self.theta;
        for (xi, w) in self.inputs.iter().zip(self.weights.iter()) {
            let r = x - xi;
            let c = w * (-self.theta * r.norm_squared()).exp();
            if c == 0.0 {
                continue;
            }
            outer.syger(four_theta_sq * c, &r, &r, 1.0);
            diag += c;
        }
        outer.fill_upper_triangle_with_lower_triangle();
        for i in 0..d {
            outer[(i, i)] -= 2.0 * self.theta * diag;
        }
        outer
    }
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().amax()
}

/// `n` points `Σ u_i x_i` with `u` drawn from the flat Dirichlet distribution.
pub fn sample_convex_hull<R: Rng + ?Sized>(
    inputs: &[DVector<f64>],
    n: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    if inputs.is_empty() {
        return Err(Error::invalid("hull sampling needs at least one point"));
    }
    let d = inputs[0].len();
    let mut out = Vec::with_capacity(n);
    let mut u = vec![0.0; inputs.len()];
    for _ in 0..n {
        let mut total = 0.0;
        for ui in u.iter_mut() {
            let e: f64 = Exp1.sample(rng);
            *ui = e;
            total += e;
        }
        let mut p = DVector::zeros(d);
        for (ui, xi) in u.iter().zip(inputs) {
            p.axpy(ui / total, xi, 1.0);
        }
        out.push(p);
    }
    Ok(out)
}

/// Max spectral norm of the posterior-mean Hessian over `samples_per_dim · d` hull samples and
/// the population itself, floored at [`K_FLOOR`].
pub fn estimate_lipschitz<R: Rng + ?Sized>(
    inputs: &[DVector<f64>],
    targets: &[f64],
    noise_diag: f64,
    samples_per_dim: usize,
    rng: &mut R,
) -> Result<f64> {
    let model = GpModel::fit(inputs, targets, noise_diag)?;
    let d = inputs[0].len();
    let queries = sample_convex_hull(inputs, samples_per_dim * d, rng)?;
    let k_hat = queries
        .iter()
        .chain(inputs)
        .map(|q| symmetric_spectral_norm(&model.posterior_mean_hessian(q)))
        .fold(0.0, f64::max);
    if !k_hat.is_finite() {
        return Err(Error::EstimationFailed("non-finite Hessian norm".into()));
    }
    Ok(k_hat.max(K_FLOOR))
}
