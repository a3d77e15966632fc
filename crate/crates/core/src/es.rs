//! CMA-ES engine with caller-supplied recombination weights.
//!
//! The state machine follows the standard (μ/μ_W, λ) scheme: candidates are sampled as
//! `x = m + C^{1/2} ε` with `ε ~ σ N(0, I)`, the mean moves by `Σ w_i C^{1/2} ε_i`, the step size
//! is adapted by cumulative step-size adaptation and the covariance by the rank-one plus
//! rank-μ update. Strategy constants are recomputed every iteration from the variance-effective
//! selection mass `μ_eff = 1 / Σ w_i²` of the weights actually used, so the same engine serves
//! rank-based and improvement-proportional weighting.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::benchmarks::SearchSpace;
use crate::error::{Error, Result};

/// Eigenvalues below `EIGEN_FLOOR * s_max` are raised to that value.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// How cumulative step-size adaptation compensates for improvement-proportional weights,
/// whose search direction is on average half as long as the one the bound is derived for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSizeCorrection {
    /// Plain CSA.
    #[default]
    None,
    /// The realized mean shift entering the σ-path is multiplied by 2.
    DoubledShift,
    /// The expected length `E‖N(0, I)‖` the σ-path is compared with is halved.
    HalvedReference,
    /// The step-size damping `d_σ` is halved, so σ reacts twice as fast to the path length.
    HalvedDamping,
}

/// A sampled candidate. `mean_value` and `delta` are filled by the evaluation step.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    /// Mutation vector drawn from `σ N(0, I)`.
    pub eps: DVector<f64>,
    /// `m + C^{1/2} eps`.
    pub x: DVector<f64>,
    pub mean_value: Option<f64>,
    /// `L̄(m) - L̄(x)`.
    pub delta: Option<f64>,
}

/// Learning rates and damping of the standard CMA-ES for a given dimension and `μ_eff`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrategyConstants {
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// `E‖N(0, I)‖`.
    pub chi_n: f64,
}

impl StrategyConstants {
    pub fn new(d: usize, mu_eff: f64) -> Self {
        let n = d as f64;
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff))
            .max(0.0);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Self {
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

/// Log-decreasing positive weights for the `mu` best of `lambda`, normalized to sum 1.
pub fn default_weights(lambda: usize, mu: usize) -> Vec<f64> {
    let mu = mu.min(lambda);
    let raw: Vec<f64> = (1..=mu)
        .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Per-candidate weights for the default scheme: the `mu` lowest `values` receive the
/// log-decreasing weights by rank, everything else gets zero. Ties keep index order.
pub fn rank_weights(values: &[f64], mu: usize) -> Vec<f64> {
    let base = default_weights(values.len(), mu);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut weights = vec![0.0; values.len()];
    for (rank, &idx) in order.iter().take(base.len()).enumerate() {
        weights[idx] = base[rank];
    }
    weights
}

/// Mutable CMA-ES state.
#[derive(Clone, Debug)]
pub struct EsState {
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    path_sigma: DVector<f64>,
    path_cov: DVector<f64>,
    iteration: u64,
    lambda: usize,
    mu: usize,
    mu_eff: f64,
    sqrt_cov: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    rng: ChaCha8Rng,
}

impl EsState {
    /// Uniform random mean in `space`, `σ = 0.1 ‖upper - lower‖_∞`, `C = I`, zero paths.
    pub fn new(space: &SearchSpace, lambda: usize, mu: usize, seed: u64) -> Result<Self> {
        if lambda < 2 {
            return Err(Error::invalid(format!("lambda must be >= 2, got {lambda}")));
        }
        if mu == 0 || mu > lambda {
            return Err(Error::invalid(format!("mu must be in [1, {lambda}], got {mu}")));
        }
        let d = space.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = DVector::from_iterator(
            d,
            space
                .lower()
                .iter()
                .zip(space.upper())
                .map(|(lo, hi)| rng.random_range(*lo..*hi)),
        );
        let weights = default_weights(lambda, mu);
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        Ok(Self {
            mean,
            sigma: 0.1 * space.max_width(),
            cov: DMatrix::identity(d, d),
            path_sigma: DVector::zeros(d),
            path_cov: DVector::zeros(d),
            iteration: 0,
            lambda,
            mu,
            mu_eff,
            sqrt_cov: DMatrix::identity(d, d),
            eigenvalues: DVector::from_element(d, 1.0),
            rng,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
    pub fn sqrt_cov(&self) -> &DMatrix<f64> {
        &self.sqrt_cov
    }
    pub fn path_sigma(&self) -> &DVector<f64> {
        &self.path_sigma
    }
    pub fn path_cov(&self) -> &DVector<f64> {
        &self.path_cov
    }
    pub fn iteration(&self) -> u64 {
        self.iteration
    }
    pub fn lambda(&self) -> usize {
        self.lambda
    }
    pub fn mu(&self) -> usize {
        self.mu
    }
    /// `μ_eff` of the weights used in the most recent update.
    pub fn mu_eff(&self) -> f64 {
        self.mu_eff
    }
    /// Eigenvalues of `C` as of the last decomposition.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn set_mean(&mut self, mean: DVector<f64>) -> Result<()> {
        if mean.len() != self.dimension() {
            return Err(Error::invalid("mean dimension mismatch"));
        }
        self.mean = mean;
        Ok(())
    }

    pub fn set_sigma(&mut self, sigma: f64) -> Result<()> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(())
    }

    pub fn set_covariance(&mut self, cov: DMatrix<f64>) -> Result<()> {
        let d = self.dimension();
        if cov.shape() != (d, d) {
            return Err(Error::invalid("covariance shape mismatch"));
        }
        check_symmetric(&cov)?;
        self.cov = cov;
        self.refresh_decomposition()
    }

    /// Replaces the candidate-sampling stream.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Symmetrizes `C`, floors its spectrum at `EIGEN_FLOOR * s_max` and caches `C^{1/2}`.
    fn refresh_decomposition(&mut self) -> Result<()> {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        if sym.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged("covariance contains non-finite entries".into()));
        }
        let eig = SymmetricEigen::new(sym);
        let s_max = eig.eigenvalues.max();
        if s_max.is_nan() || s_max <= 0.0 {
            return Err(Error::Diverged("covariance has no positive eigenvalue".into()));
        }
        let floor = EIGEN_FLOOR * s_max;
        let values = eig.eigenvalues.map(|v| v.max(floor));
        let basis = &eig.eigenvectors;
        let rebuilt = basis * DMatrix::from_diagonal(&values) * basis.transpose();
        self.cov = (&rebuilt + rebuilt.transpose()) * 0.5;
        let root = basis * DMatrix::from_diagonal(&values.map(f64::sqrt)) * basis.transpose();
        self.sqrt_cov = (&root + root.transpose()) * 0.5;
        self.eigenvalues = values;
        Ok(())
    }

    /// Draws `λ` candidates with `ε_i ~ σ N(0, I)` and `x_i = m + C^{1/2} ε_i`.
    pub fn sample_population(&mut self) -> Vec<Candidate> {
        let d = self.dimension();
        (0..self.lambda)
            .map(|_| {
                let eps = DVector::from_fn(d, |_, _| {
                    let z: f64 = StandardNormal.sample(&mut self.rng);
                    self.sigma * z
                });
                let x = &self.mean + &self.sqrt_cov * &eps;
                Candidate {
                    eps,
                    x,
                    mean_value: None,
                    delta: None,
                }
            })
            .collect()
    }

    /// `m ← m + Σ w_i C^{1/2} ε_i`; returns the new mean.
    pub fn recombine_mean(
        &mut self,
        weights: &[f64],
        candidates: &[Candidate],
    ) -> Result<DVector<f64>> {
        check_weights(weights, candidates)?;
        let step = &self.sqrt_cov * weighted_sum(weights, candidates.iter().map(|c| &c.eps));
        self.mean += step;
        Ok(self.mean.clone())
    }

    /// Step-size and covariance update from the weights and mutation vectors of one iteration.
    ///
    /// Must be called before the next [`sample_population`](Self::sample_population), with the
    /// same candidates that [`recombine_mean`](Self::recombine_mean) used.
    pub fn adapt(
        &mut self,
        weights: &[f64],
        candidates: &[Candidate],
        correction: StepSizeCorrection,
    ) -> Result<()> {
        check_weights(weights, candidates)?;
        let d = self.dimension();
        let sum_w: f64 = weights.iter().sum();
        let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
        if sum_sq > 0.0 {
            self.mu_eff = 1.0 / sum_sq;
        }
        let k = StrategyConstants::new(d, self.mu_eff);

        // Normalized mutations z_i = eps_i / sigma and y_i = C^{1/2} z_i.
        let inv_sigma = 1.0 / self.sigma;
        let z_w = weighted_sum(weights, candidates.iter().map(|c| &c.eps)) * inv_sigma;
        let y_w = &self.sqrt_cov * &z_w;

        let shift_scale = match correction {
            StepSizeCorrection::DoubledShift => 2.0,
            _ => 1.0,
        };
        let reference = match correction {
            StepSizeCorrection::HalvedReference => 0.5 * k.chi_n,
            _ => k.chi_n,
        };

        self.path_sigma = &self.path_sigma * (1.0 - k.c_sigma)
            + &z_w * ((k.c_sigma * (2.0 - k.c_sigma) * self.mu_eff).sqrt() * shift_scale);
        let ps_norm = self.path_sigma.norm();
        let t = self.iteration + 1;
        let decay = 1.0 - (1.0 - k.c_sigma).powf(2.0 * t as f64);
        let h_sigma = if ps_norm / decay.sqrt() < (1.4 + 2.0 / (d as f64 + 1.0)) * reference {
            1.0
        } else {
            0.0
        };
        self.path_cov = &self.path_cov * (1.0 - k.c_c)
            + &y_w * (h_sigma * (k.c_c * (2.0 - k.c_c) * self.mu_eff).sqrt());

        let delta_h = (1.0 - h_sigma) * k.c_c * (2.0 - k.c_c);
        let mut cov = &self.cov * (1.0 - k.c_1 - k.c_mu * sum_w + k.c_1 * delta_h);
        cov.ger(k.c_1, &self.path_cov, &self.path_cov, 1.0);
        for (w, cand) in weights.iter().zip(candidates) {
            if *w != 0.0 {
                let y = &self.sqrt_cov * &cand.eps * inv_sigma;
                cov.ger(k.c_mu * w, &y, &y, 1.0);
            }
        }
        self.cov = cov;

        let damping = match correction {
            StepSizeCorrection::HalvedDamping => 0.5 * k.d_sigma,
            _ => k.d_sigma,
        };
        let log_step = (k.c_sigma / damping) * (ps_norm / reference - 1.0);
        let sigma = self.sigma * log_step.exp();
        self.sigma = sigma.clamp(f64::MIN_POSITIVE, 1e300);
        self.iteration += 1;
        self.refresh_decomposition()
    }
}

fn weighted_sum<'a>(
    weights: &[f64],
    vectors: impl Iterator<Item = &'a DVector<f64>>,
) -> DVector<f64> {
    let mut acc: Option<DVector<f64>> = None;
    for (w, v) in weights.iter().zip(vectors) {
        match acc.as_mut() {
            Some(a) => a.axpy(*w, v, 1.0),
            None => acc = Some(v * *w),
        }
    }
    acc.unwrap_or_else(|| DVector::zeros(0))
}

fn check_weights(weights: &[f64], candidates: &[Candidate]) -> Result<()> {
    if weights.len() != candidates.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} candidates",
            weights.len(),
            candidates.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::invalid("no candidates"));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::invalid(format!("non-finite weight {w}")));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid("matrix is not square"));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::invalid(format!("matrix is not symmetric (asymmetry {asym:e})")));
    }
    Ok(())
}

/// Largest eigenvalue of a symmetric matrix.
pub fn largest_eigenvalue(cov: &DMatrix<f64>) -> Result<f64> {
    check_symmetric(cov)?;
    let sym = (cov + cov.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn cube_state(lo: f64, hi: f64, d: usize, lambda: usize, seed: u64) -> EsState {
        EsState::new(&SearchSpace::cube(lo, hi, d).unwrap(), lambda, lambda / 2, seed).unwrap()
    }

    #[test]
    fn initial_step_size_follows_box_width() {
        assert_relative_eq!(cube_state(-5.0, 5.0, 10, 20, 1).sigma(), 1.0);
        assert_relative_eq!(cube_state(-1.0, 1.0, 10, 20, 1).sigma(), 0.2);
        assert_relative_eq!(cube_state(-400.0, 400.0, 20, 20, 1).sigma(), 80.0);
    }

    #[test]
    fn initial_mean_inside_box_and_identity_covariance() {
        let s = cube_state(-5.0, 5.0, 6, 10, 3);
        assert!(s.mean().iter().all(|v| (-5.0..=5.0).contains(v)));
        assert_eq!(s.cov(), &DMatrix::identity(6, 6));
        assert_eq!(s.path_sigma().norm(), 0.0);
        assert_eq!(s.iteration(), 0);
    }

    #[test]
    fn rejects_small_lambda() {
        let space = SearchSpace::cube(-1.0, 1.0, 3).unwrap();
        assert!(EsState::new(&space, 1, 1, 0).is_err());
        assert!(EsState::new(&space, 4, 5, 0).is_err());
    }

    #[test]
    fn candidates_satisfy_sampling_identity() {
        let mut s = cube_state(-5.0, 5.0, 3, 8, 9);
        let cov = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.5, 1.0]);
        s.set_covariance(cov).unwrap();
        for c in s.sample_population() {
            let expected = s.sqrt_cov() * &c.eps;
            let got = &c.x - s.mean();
            assert!((got - &expected).norm() <= 1e-10 * (1.0 + expected.norm()));
        }
        let sq = s.sqrt_cov() * s.sqrt_cov();
        assert!((sq - s.cov()).amax() < 1e-10);
    }

    #[test]
    fn sampling_moments() {
        let mut s = cube_state(-1.0, 1.0, 2, 1000, 4);
        s.set_mean(DVector::zeros(2)).unwrap();
        s.set_sigma(1.0).unwrap();
        s.set_covariance(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])))
            .unwrap();
        let xs: Vec<DVector<f64>> = (0..100)
            .flat_map(|_| s.sample_population().into_iter().map(|c| c.x))
            .collect();
        let n = xs.len() as f64;
        let m0 = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let m1 = xs.iter().map(|x| x[1]).sum::<f64>() / n;
        assert!(m0.abs() <= 3.0 * 2.0 / n.sqrt());
        assert!(m1.abs() <= 3.0 / n.sqrt());
        let v0 = xs.iter().map(|x| (x[0] - m0).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((v0 - 4.0).abs() <= 0.05 * 4.0, "variance {v0}");
    }

    #[test]
    fn mutation_length_scales_with_sigma() {
        let d = 10;
        let mut s = cube_state(-1.0, 1.0, d, 1000, 8);
        s.set_sigma(0.5).unwrap();
        let norms: Vec<f64> = (0..50)
            .flat_map(|_| s.sample_population().into_iter().map(|c| c.eps.norm_squared()))
            .collect();
        let n = norms.len() as f64;
        let mean = norms.iter().sum::<f64>() / n;
        let sd = (norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 0.25 * d as f64).abs() <= 3.0 * sd / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn identical_seeds_give_identical_populations() {
        let mut a = cube_state(-5.0, 5.0, 4, 10, 42);
        let mut b = cube_state(-5.0, 5.0, 4, 10, 42);
        assert_eq!(a.sample_population(), b.sample_population());
    }

    #[test]
    fn recombination_edge_cases() {
        let mut s = cube_state(-5.0, 5.0, 3, 4, 2);
        let pop = s.sample_population();
        let before = s.mean().clone();
        s.recombine_mean(&[0.0; 4], &pop).unwrap();
        assert_eq!(s.mean(), &before);

        // Single candidate with unit weight and identity covariance moves onto it.
        let one = vec![pop[0].clone()];
        let moved = s.recombine_mean(&[1.0], &one).unwrap();
        assert!((moved - (&before + &pop[0].eps)).norm() < 1e-12);

        assert!(s.recombine_mean(&[f64::NAN, 0.0, 0.0, 0.0], &pop).is_err());
        assert!(s.recombine_mean(&[1.0], &pop).is_err());
    }

    #[test]
    fn zero_weights_only_decay_paths() {
        let mut s = cube_state(-5.0, 5.0, 4, 8, 5);
        let pop = s.sample_population();
        let w = rank_weights(&pop.iter().map(|c| c.x.norm()).collect::<Vec<_>>(), 4);
        s.adapt(&w, &pop, StepSizeCorrection::None).unwrap();
        let ps = s.path_sigma().clone();
        let pc = s.path_cov().clone();
        let k = StrategyConstants::new(4, s.mu_eff());
        let pop = s.sample_population();
        s.adapt(&[0.0; 8], &pop, StepSizeCorrection::None).unwrap();
        assert!((s.path_sigma() - ps * (1.0 - k.c_sigma)).norm() < 1e-12);
        assert!((s.path_cov() - pc * (1.0 - k.c_c)).norm() < 1e-12);
    }

    #[test]
    fn default_weights_are_log_decreasing() {
        let w = default_weights(100, 50);
        assert_eq!(w.len(), 50);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(w.windows(2).all(|p| p[0] > p[1]));
        let r = rank_weights(&[3.0, 1.0, 2.0, 1.0], 2);
        // Ties broken by index: candidate 1 ranks before candidate 3.
        assert!(r[1] > r[3] && r[3] > 0.0);
        assert_eq!(r[0], 0.0);
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn largest_eigenvalue_cases() {
        assert_relative_eq!(largest_eigenvalue(&DMatrix::identity(10, 10)).unwrap(), 1.0);
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.5]));
        assert_relative_eq!(largest_eigenvalue(&diag).unwrap(), 3.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(largest_eigenvalue(&bad).is_err());
    }

    #[test]
    fn largest_eigenvalue_of_constructed_spd() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let d = 8;
            let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let q = a.qr().q();
            let spectrum: Vec<f64> = (0..d).map(|_| rng.random_range(0.01..50.0)).collect();
            let top = spectrum.iter().cloned().fold(0.0, f64::max);
            let m = &q * DMatrix::from_diagonal(&DVector::from_vec(spectrum)) * q.transpose();
            let m = (&m + m.transpose()) * 0.5;
            let got = largest_eigenvalue(&m).unwrap();
            assert!((got - top).abs() <= 1e-8 * top);
        }
    }

    #[test]
    fn flooring_restores_positive_definiteness() {
        let mut s = cube_state(-1.0, 1.0, 3, 6, 1);
        let sing = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, -1e-20]));
        s.set_covariance(sing).unwrap();
        let ev = s.cov().clone().symmetric_eigenvalues();
        let max = ev.max();
        assert!(ev.min() > 0.0);
        assert!(max / ev.min() <= 1.0 / EIGEN_FLOOR * (1.0 + 1e-6));
    }

    fn sphere_run(seed: u64, iterations: usize) -> EsState {
        let mut s = cube_state(-5.0, 5.0, 10, 20, seed);
        for _ in 0..iterations {
            let pop = s.sample_population();
            let values: Vec<f64> = pop.iter().map(|c| c.x.norm_squared()).collect();
            let w = rank_weights(&values, 10);
            s.recombine_mean(&w, &pop).unwrap();
            s.adapt(&w, &pop, StepSizeCorrection::None).unwrap();
            let c = s.cov();
            assert!((c - c.transpose()).amax() <= 1e-10 * c.amax());
            assert!(s.eigenvalues().min() > 0.0);
            assert!(s.sigma().is_finite() && s.sigma() > 0.0);
        }
        s
    }

    #[test]
    fn noiseless_sphere_step_size_shrinks() {
        let s = sphere_run(12, 200);
        assert!(s.sigma() <= 1e-2, "sigma {}", s.sigma());
        assert!(s.mean().norm_squared() < 1e-6);
    }
}
