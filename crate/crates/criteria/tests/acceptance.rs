//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any criterion fails.
//!
//! Runs as a plain binary (`harness = false`) so every criterion reports even when an earlier
//! one fails. Pass criterion numbers to run a subset: `cargo test --test acceptance -- 3 7`.

use std::process::ExitCode;
use std::time::Instant;

use arcma::ar::{mutation_moments, proportional_weights, offset_a};
use arcma::baselines::{three_stage_schedule, DEFAULT_STAGE_RATIO, DEFAULT_STAGE_REEVALS};
use arcma::benchmarks::{BenchmarkFunction, FunctionId, NoisyOracle};
use arcma::efficiency::{freeze_state, log_grid, simulate_efficiency, FreezeSpec, TrialStep};
use arcma::es::EsState;
use arcma::harness::{
    compute_ecdf, execute, rows_to_csv, run, run_efficiency, EfficiencyConfig, FixedMParams,
    Method, MethodParams, RunConfig,
};
use arcma::lipschitz::{estimate_lipschitz, symmetric_spectral_norm, GpModel};
use arcma::noise_probe::{probe_noise, ProbeSettings};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Verdict {
    pass: bool,
    detail: String,
}

/// Final errors of every experiment run here, fed to the ECDF check.
#[derive(Default)]
struct Emitted {
    error_sets: Vec<Vec<f64>>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn final_errors(configs: &[RunConfig]) -> Vec<f64> {
    configs.iter().map(|c| run(c).expect("run succeeds").final_error).collect()
}

fn sphere(d: usize, method: Method, tau_squared: f64, budget: u64, seed: u64) -> RunConfig {
    RunConfig {
        tau_squared,
        budget_total: budget,
        seed,
        ..RunConfig::new(FunctionId::Sphere, d, method)
    }
}

fn noiseless_parity(emitted: &mut Emitted) -> Verdict {
    let ar: Vec<RunConfig> = (0..10).map(|s| sphere(10, Method::Ar, 0.0, 10_000, s)).collect();
    let fm: Vec<RunConfig> = (0..10)
        .map(|s| RunConfig {
            params: MethodParams::FixedM(FixedMParams { m: 1 }),
            ..sphere(10, Method::FixedM, 0.0, 10_000, s)
        })
        .collect();
    let (ar_err, fm_err) = (final_errors(&ar), final_errors(&fm));
    let (ar_med, fm_med) = (median(&ar_err), median(&fm_err));
    emitted.error_sets.extend([ar_err, fm_err]);
    Verdict {
        pass: ar_med <= 1e-2 && ar_med <= 100.0 * fm_med,
        detail: format!(
            "AR median {ar_med:.2e} (need <= 1e-2), fixed_m(1) median {fm_med:.2e}, ratio {:.1e} (need <= 100)",
            ar_med / fm_med
        ),
    }
}

fn noisy_advantage(emitted: &mut Emitted) -> Verdict {
    let ar: Vec<RunConfig> = (0..10).map(|s| sphere(10, Method::Ar, 1.0, 1_000_000, s)).collect();
    let fm: Vec<RunConfig> = (0..10)
        .map(|s| RunConfig {
            params: MethodParams::FixedM(FixedMParams { m: 100 }),
            ..sphere(10, Method::FixedM, 1.0, 1_000_000, s)
        })
        .collect();
    let (ar_err, fm_err) = (final_errors(&ar), final_errors(&fm));
    let (ar_med, fm_med) = (median(&ar_err), median(&fm_err));
    emitted.error_sets.extend([ar_err, fm_err]);
    Verdict {
        pass: 10.0 * ar_med <= fm_med,
        detail: format!(
            "AR median {ar_med:.2e}, fixed_m(100) median {fm_med:.2e}, advantage {:.2}x (need >= 10x)",
            fm_med / ar_med
        ),
    }
}

fn efficiency_bound() -> Verdict {
    let grid = log_grid(1, 200, 40).expect("valid grid");
    let (mut wins, mut worst_cover, mut total_cover) = (0, usize::MAX, 0);
    let mut raw_wins = 0;
    for rep in 0..10 {
        let frozen = freeze_state(&FreezeSpec {
            seed: rep,
            ..FreezeSpec::default()
        })
        .expect("frozen state");
        let curve = simulate_efficiency(&frozen, &grid, 50, TrialStep::Analysis, 1_000 + rep)
            .expect("non-degenerate bound");
        let cover = curve.points_above_bound(2.0);
        worst_cover = worst_cover.min(cover);
        total_cover += cover;
        wins += usize::from(curve.m_star_feasible >= curve.m_star_empirical as f64);
        raw_wins += usize::from(curve.m_star_theoretical >= curve.m_star_empirical as f64);
    }
    let needed = (0.95 * grid.len() as f64).ceil() as usize;
    Verdict {
        pass: worst_cover >= needed && wins >= 7,
        detail: format!(
            "bound - 2SE held at >= {worst_cover}/40 points in every repetition ({total_cover}/400 total, need {needed}/40); \
             maximizer upper-bounds empirical argmax in {wins}/10 (unclamped 2a/b: {raw_wins}/10; need 7)"
        ),
    }
}

fn moment_formulas() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = DVector::from_vec(vec![1.0, -0.5, 2.0, 0.0, 0.3]);
    let (sigma, tau, m, offset) = (0.7, 1.5, 4.0, 1.2);
    let (mean, second) = mutation_moments(&g, sigma, tau, m, offset);
    let d = g.len();
    let n = 1_000_000;
    let (mut s1, mut s2, mut s4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut eps = DVector::zeros(d);
    for _ in 0..n {
        for e in eps.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *e = sigma * z;
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        let delta = -g.dot(&eps) + tau / m.sqrt() * noise;
        for k in 0..d {
            let v = (delta + offset) * eps[k];
            let v2 = v * v;
            s1[k] += v;
            s2[k] += v2;
            s4[k] += v2 * v2;
        }
    }
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    for k in 0..d {
        let m1 = s1[k] / nf;
        let se1 = ((s2[k] / nf - m1 * m1) / nf).sqrt();
        let m2 = s2[k] / nf;
        let se2 = ((s4[k] / nf - m2 * m2) / nf).sqrt();
        worst = worst.max(((m1 - mean[k]) / se1).abs()).max(((m2 - second[k]) / se2).abs());
    }
    Verdict {
        pass: worst <= 4.0,
        detail: format!("largest deviation {worst:.2} SE over {d} coordinates x 2 moments (need <= 4)"),
    }
}

fn quadratic_upper_bound() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..1_000 {
        let d = rng.random_range(1..=10);
        let raw = DMatrix::from_fn(d, d, |_, _| rng.random_range(-3.0..3.0));
        let h = (&raw + raw.transpose()) * 0.5;
        let b = DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
        let k = symmetric_spectral_norm(&h);
        let loss = |x: &DVector<f64>| 0.5 * x.dot(&(&h * x)) + b.dot(x);
        for _ in 0..1_000 {
            let x = DVector::from_fn(d, |_, _| rng.random_range(-10.0..10.0));
            let y = DVector::from_fn(d, |_, _| rng.random_range(-10.0..10.0));
            let grad = &h * &x + &b;
            let step = &y - &x;
            let lhs = loss(&y);
            let rhs = loss(&x) + grad.dot(&step) + 0.5 * k * step.norm_squared();
            if lhs - rhs > 1e-9 * lhs.abs().max(rhs.abs()).max(1.0) {
                violations += 1;
            }
            checks += 1;
        }
    }
    Verdict {
        pass: violations == 0,
        detail: format!("{violations} violations in {checks} pairs"),
    }
}

fn fd_hessian(gp: &GpModel, x: &DVector<f64>, step: f64) -> DMatrix<f64> {
    let d = x.len();
    DMatrix::from_fn(d, d, |i, j| {
        let (mut ei, mut ej) = (DVector::zeros(d), DVector::zeros(d));
        ei[i] = step;
        ej[j] = step;
        (gp.posterior_mean(&(x + &ei + &ej)) - gp.posterior_mean(&(x + &ei - &ej))
            - gp.posterior_mean(&(x - &ei + &ej))
            + gp.posterior_mean(&(x - &ei - &ej)))
            / (4.0 * step * step)
    })
}

fn lipschitz_calibration() -> Verdict {
    let f = BenchmarkFunction::new(FunctionId::Sphere, 5).expect("sphere");
    let mut state = EsState::new(f.space(), 100, 50, 3).expect("state");
    let inputs: Vec<DVector<f64>> = state.sample_population().into_iter().map(|c| c.x).collect();
    let targets: Vec<f64> = inputs
        .iter()
        .map(|x| f.evaluate_true(x.as_slice()).expect("finite"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k_hat = estimate_lipschitz(&inputs, &targets, 0.0, 100, &mut rng).expect("estimate");

    let gp = GpModel::fit(&inputs, &targets, 0.0).expect("fit");
    let step = 1e-4 / gp.theta().sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let w: Vec<f64> = (0..inputs.len()).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let q = inputs.iter().zip(&w).fold(DVector::zeros(5), |acc, (p, wi)| acc + p * (wi / total));
        let h = gp.posterior_mean_hessian(&q);
        let fd = fd_hessian(&gp, &q, step);
        worst = worst.max((&h - &fd).amax() / h.amax());
    }
    Verdict {
        pass: (1.0..=6.0).contains(&k_hat) && worst <= 1e-5,
        detail: format!(
            "K estimate {k_hat:.3} (true 2, need [1, 6]); worst Hessian vs finite-difference relative error {worst:.1e} over 100 queries (need <= 1e-5)"
        ),
    }
}

fn noise_probe_calibration() -> Verdict {
    let settings = ProbeSettings::default();
    let f = BenchmarkFunction::new(FunctionId::Sphere, 10).expect("sphere");
    let mut inside = 0;
    for seed in 0..100 {
        let mut oracle = NoisyOracle::new(f.clone(), 1.0, 10_000, seed).expect("oracle");
        let tau_hat = probe_noise(&mut oracle, &[1.0; 10], 10_000, &settings)
            .expect("probe")
            .tau_hat;
        inside += usize::from((0.9..=1.1).contains(&tau_hat));
    }
    Verdict {
        pass: inside >= 95,
        detail: format!("estimate within [0.9, 1.1] in {inside}/100 trials (need >= 95)"),
    }
}

fn three_stage_numbers() -> Verdict {
    let schedule = three_stage_schedule(10_000_000, DEFAULT_STAGE_REEVALS, DEFAULT_STAGE_RATIO)
        .expect("schedule");
    let counts: Vec<u64> = schedule.stages.iter().map(|s| s.candidates).collect();
    let target = [7_150.0, 2_145.0, 715.0];
    let worst = counts
        .iter()
        .zip(target)
        .map(|(c, t)| (*c as f64 - t).abs() / t)
        .fold(0.0, f64::max);
    Verdict {
        pass: worst <= 0.01,
        detail: format!("counts {counts:?}, worst relative gap {:.2}% (need <= 1%)", 100.0 * worst),
    }
}

fn weight_and_ecdf_properties(emitted: &Emitted) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut weight_failures = 0;
    for _ in 0..10_000 {
        let lambda = rng.random_range(2..200);
        let deltas: Vec<f64> = (0..lambda).map(|_| rng.random_range(-10.0..10.0)).collect();
        if deltas.iter().all(|d| *d == deltas[0]) {
            continue;
        }
        let w = proportional_weights(&deltas, offset_a(&deltas).expect("finite")).expect("weights");
        let sum: f64 = w.iter().sum();
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        if (sum - 1.0).abs() > 1e-12 || min != 0.0 {
            weight_failures += 1;
        }
    }
    let mut sets = emitted.error_sets.clone();
    for _ in 0..1_000 {
        let n = rng.random_range(1..50);
        sets.push((0..n).map(|_| 10f64.powf(rng.random_range(-12.0..2.0))).collect());
    }
    let mut ecdf_failures = 0;
    for errors in &sets {
        let c = compute_ecdf(errors).expect("ecdf");
        let monotone = c.fractions.windows(2).all(|w| w[0] <= w[1]);
        let ranged = c.fractions.iter().all(|f| (0.0..=1.0).contains(f));
        if !(monotone && ranged && c.fractions.last() == Some(&1.0)) {
            ecdf_failures += 1;
        }
    }
    Verdict {
        pass: weight_failures == 0 && ecdf_failures == 0,
        detail: format!(
            "{weight_failures} weight failures in 10000 cases; {ecdf_failures} invalid ECDFs of {}",
            sets.len()
        ),
    }
}

fn determinism() -> Verdict {
    let mut configs = Vec::new();
    for (i, method) in Method::ALL.into_iter().enumerate() {
        for function in [FunctionId::Sphere, FunctionId::Rastrigin, FunctionId::SumAbsolute] {
            configs.push(RunConfig {
                lambda: 12,
                mu: 6,
                params: match method {
                    Method::ThreeStage => MethodParams::ThreeStage(arcma::harness::ThreeStageParams {
                        reevals: [1, 4, 16],
                        ..Default::default()
                    }),
                    _ => MethodParams::default_for(method),
                },
                ..sphere(4, method, 10.0, 40_000, 17 + i as u64)
            });
            configs.last_mut().expect("pushed").function = function;
        }
    }
    let (a, b) = (tempdir(), tempdir());
    let first = execute(&configs, a.path(), 1).expect("pool");
    let second = execute(&configs, b.path(), 2).expect("pool");
    let mut mismatches = 0;
    let mut files = 0;
    for ((_, x), (_, y)) in first.iter().zip(&second) {
        let (x, y) = (x.as_ref().expect("run"), y.as_ref().expect("run"));
        for ext in ["json", "csv"] {
            files += 1;
            let (bx, by) = (
                std::fs::read(x.with_extension(ext)).expect("written"),
                std::fs::read(y.with_extension(ext)).expect("written"),
            );
            mismatches += usize::from(bx != by);
        }
    }
    let direct = run(&configs[0]).expect("run");
    let again = run(&configs[0]).expect("run");
    mismatches += usize::from(
        rows_to_csv(&direct.rows).expect("csv") != rows_to_csv(&again.rows).expect("csv"),
    );
    let eff = EfficiencyConfig {
        grid_max: 30,
        grid_points: 8,
        trials: 5,
        ..EfficiencyConfig::default()
    };
    let (r1, r2) = (run_efficiency(&eff).expect("lab"), run_efficiency(&eff).expect("lab"));
    mismatches += usize::from(
        serde_json::to_vec(&r1).expect("json") != serde_json::to_vec(&r2).expect("json"),
    );
    Verdict {
        pass: mismatches == 0,
        detail: format!(
            "{mismatches} mismatches across {files} record files (serial vs 2 workers), a direct rerun and the efficiency lab"
        ),
    }
}

fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let selected = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let mut emitted = Emitted::default();
    let mut failed = 0;
    let mut ran = 0;
    let mut report = |n: usize, name: &str, check: &mut dyn FnMut() -> Verdict| {
        if !selected(n) {
            return;
        }
        let start = Instant::now();
        let v = check();
        ran += 1;
        failed += usize::from(!v.pass);
        println!(
            "[{}] {n:>2} {name}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "noiseless parity", &mut || noiseless_parity(&mut emitted));
    report(2, "noisy advantage", &mut || noisy_advantage(&mut emitted));
    report(3, "efficiency bound", &mut efficiency_bound);
    report(4, "moment formulas", &mut moment_formulas);
    report(5, "quadratic upper bound", &mut quadratic_upper_bound);
    report(6, "curvature estimator", &mut lipschitz_calibration);
    report(7, "noise probe calibration", &mut noise_probe_calibration);
    report(8, "three-stage schedule", &mut three_stage_numbers);
    report(9, "weight and ECDF properties", &mut || weight_and_ecdf_properties(&emitted));
    report(10, "determinism", &mut determinism);
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
