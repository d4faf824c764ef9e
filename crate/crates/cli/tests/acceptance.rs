//! Acceptance criteria, one pass/fail line each. Exits nonzero if any fail.
//!
//! Run with `cargo test -p advi-cli --test acceptance`.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use advi_core::advi::estimate_gradients;
use advi_core::transforms::{unpack, TransformKind};
use advi_core::{
    draw_posterior, infer_dims, log_joint_gradient, log_joint_unconstrained, make_model, minibatch_log_joint, run_advi,
    synth, AdviConfig, Dataset, Dims, Hypers, InitMode, Model, Observations, RngStreams, VariationalParams, ZooModel,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn build(name: &str, data: &Dataset, dims: &[(&str, usize)], hypers: &[(&str, f64)]) -> ZooModel {
    let explicit: Dims = dims.iter().map(|&(k, v)| (k.to_owned(), v)).collect();
    let hypers: Hypers = hypers.iter().map(|&(k, v)| (k.to_owned(), v)).collect();
    let dims = infer_dims(name, data, &explicit).unwrap();
    make_model(name, &hypers, &dims).unwrap()
}

fn normal_vec(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn zoo_fixtures() -> Vec<(ZooModel, Dataset)> {
    let mix = synth::mixture(60, &[vec![-2.0, 0.0], vec![2.0, 1.0], vec![0.0, 3.0]], 0.7, 5).data;
    let counts = synth::count_matrix(6, 8, 3, 2.0, 9).train;
    vec![
        ("poisson_exponential", synth::poisson_counts(40, 3.0, 1), vec![], vec![]),
        ("linreg_ard", synth::linreg(60, 0, 6, 3, 1.0, 2).train, vec![], vec![]),
        (
            "hier_logistic",
            synth::survey(100, [4, 5, 20, 10, 5], 3),
            vec![],
            vec![],
        ),
        ("gamma_poisson_nmf", counts.clone(), vec![("K", 3)], vec![]),
        ("dirichlet_exponential_nmf", counts, vec![("K", 3)], vec![]),
        ("gmm", mix.clone(), vec![("K", 3)], vec![]),
        ("gmm_minibatch", mix, vec![("K", 3)], vec![("batch_size", 20.0)]),
    ]
    .into_iter()
    .map(|(name, data, dims, hypers)| (build(name, &data, &dims, &hypers), data))
    .collect()
}

/// AD gradients of the transformed log-joint match central differences
/// (h = 1e-5) within 1e-5 relative, 20 points per model.
fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (model, data) in zoo_fixtures() {
        for _ in 0..20 {
            let zeta = normal_vec(&mut rng, model.dim());
            let (_, grad) = log_joint_gradient(&model, &data, &zeta, None).unwrap();
            for k in 0..zeta.len() {
                let (mut hi, mut lo) = (zeta.clone(), zeta.clone());
                hi[k] += h;
                lo[k] -= h;
                let fd = (log_joint_unconstrained(&model, &data, &hi).unwrap()
                    - log_joint_unconstrained(&model, &data, &lo).unwrap())
                    / (2.0 * h);
                worst = worst.max((grad[k] - fd).abs() / fd.abs().max(1.0));
            }
        }
    }
    outcome(worst <= 1e-5, format!("worst relative error {worst:.2e} (limit 1e-5)"))
}

fn transform_kinds(n: usize) -> Vec<TransformKind> {
    vec![
        TransformKind::Identity { dim: n },
        TransformKind::LowerBound { lower: 0.5, dim: n },
        TransformKind::UpperBound { upper: -1.0, dim: n },
        TransformKind::Interval {
            lower: 0.0,
            upper: 100.0,
            dim: n,
        },
        TransformKind::Simplex { k: n + 1 },
        TransformKind::Ordered { k: n + 1 },
        TransformKind::PositiveOrdered { k: n + 1 },
    ]
}

/// Round trip within 1e-10, log|det J| against a numeric Jacobian within
/// 1e-5 for dims up to 5, and constraint predicates on 1000 draws each.
fn transform_suite() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (mut round_trip, mut jacobian, mut violations) = (0.0f64, 0.0f64, 0usize);
    for n in 1..=5 {
        for kind in transform_kinds(n) {
            let m = kind.unconstrained_dim();
            for draw in 0..1000 {
                let zeta: Vec<f64> = normal_vec(&mut rng, m).iter().map(|z| 2.0 * z).collect();
                let (theta, log_det) = kind.constrain::<f64>(&zeta).unwrap();
                if !kind.satisfied_by(&theta) {
                    violations += 1;
                }
                let back = kind.unconstrain(&theta).unwrap();
                for (a, b) in back.iter().zip(&zeta) {
                    round_trip = round_trip.max((a - b).abs());
                }
                if draw < 20 {
                    let h = 1e-6;
                    let mut jac = DMatrix::<f64>::zeros(m, m);
                    for j in 0..m {
                        let (mut hi, mut lo) = (zeta.clone(), zeta.clone());
                        hi[j] += h;
                        lo[j] -= h;
                        let a = kind.constrain::<f64>(&hi).unwrap().0;
                        let b = kind.constrain::<f64>(&lo).unwrap().0;
                        for i in 0..m {
                            jac[(i, j)] = (a[i] - b[i]) / (2.0 * h);
                        }
                    }
                    jacobian = jacobian.max((jac.determinant().abs().ln() - log_det).abs());
                }
            }
        }
    }
    outcome(
        round_trip <= 1e-10 && jacobian <= 1e-5 && violations == 0,
        format!(
            "round trip {round_trip:.1e} (limit 1e-10), log-det {jacobian:.1e} (limit 1e-5), {violations} predicate violations"
        ),
    )
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn std_normal() -> ZooModel {
    make_model("std_normal", &Hypers::new(), &Dims::new()).unwrap()
}

/// Mean of 1e5 single-sample gradient estimates within 3 standard errors of
/// ∇μ = −μ and ∇ω = 1 − e^{2ω}, at 5 random points.
fn estimator_unbiasedness() -> Outcome {
    let model = std_normal();
    let streams = RngStreams::new(7);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (mu, omega) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
        let p = VariationalParams::new(vec![mu], vec![omega]);
        let (mut g_mu, mut g_omega) = (Vec::with_capacity(100_000), Vec::with_capacity(100_000));
        for i in 1..=100_000 {
            let g = estimate_gradients(&model, &Dataset::new(), &p, 1, &streams, i, None).unwrap();
            g_mu.push(g.mu[0]);
            g_omega.push(g.omega[0]);
        }
        let (m, se) = mean_se(&g_mu);
        worst = worst.max((m + mu).abs() / se);
        let (m, se) = mean_se(&g_omega);
        worst = worst.max((m - (1.0 - (2.0 * omega).exp())).abs() / se);
    }
    outcome(
        worst <= 3.0,
        format!("worst deviation {worst:.2} standard errors (limit 3)"),
    )
}

/// Standard normal target, default config, 2000 iterations: |μ|, |ω| < 0.05.
fn toy_recovery() -> Outcome {
    let config = AdviConfig {
        max_iterations: 2000,
        ..AdviConfig::default()
    };
    let fit = run_advi(&std_normal(), &Dataset::new(), &config).unwrap();
    let (mu, omega) = (fit.params.mu[0], fit.params.omega[0]);
    outcome(
        mu.abs() < 0.05 && omega.abs() < 0.05,
        format!(
            "mu {mu:.4}, omega {omega:.4} after {} iterations (limit 0.05)",
            fit.iterations
        ),
    )
}

/// Poisson-exponential with x = {3, 5}: exact posterior Gamma(9, 3).
fn poisson_recovery() -> Outcome {
    let model = make_model("poisson_exponential", &Hypers::new(), &Dims::new()).unwrap();
    let data = Dataset::from_json_str(r#"{"x":[3,5]}"#).unwrap();
    let config = AdviConfig {
        threshold: 1e-12,
        ..AdviConfig::default()
    };
    let fit = run_advi(&model, &data, &config).unwrap();
    let draws = draw_posterior(&model, &fit.params, 10_000, &RngStreams::new(config.seed)).unwrap();
    let lambda: Vec<f64> = draws.rows.iter().map(|r| r[0]).collect();
    let (mean, se) = mean_se(&lambda);
    let var = se * se * lambda.len() as f64;
    outcome(
        (mean - 3.0).abs() <= 0.15 && (var - 1.0).abs() <= 0.15,
        format!("mean {mean:.4} (3 ± 5%), variance {var:.4} (1 ± 15%)"),
    )
}

fn enumerate_assignments(y: &[f64], weights: &[f64], mu: &[f64], sigma: &[f64]) -> f64 {
    let k = weights.len();
    let mut total = 0.0;
    for code in 0..k.pow(y.len() as u32) {
        let mut c = code;
        let mut p = 1.0;
        for &yn in y {
            let z = c % k;
            c /= k;
            let r = (yn - mu[z]) / sigma[z];
            p *= weights[z] * (-0.5 * r * r).exp() / (sigma[z] * (2.0 * std::f64::consts::PI).sqrt());
        }
        total += p;
    }
    total.ln()
}

/// Marginalized mixture likelihood against enumeration of all K^N
/// assignments, N ≤ 4, K ≤ 3, D = 1.
fn gmm_marginalization() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=4 {
        for k in 2..=3 {
            for _ in 0..50 {
                let y: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
                let rows: Vec<String> = y.iter().map(|v| format!("[{v:?}]")).collect();
                let data = Dataset::from_json_str(&format!(r#"{{"y":[{}]}}"#, rows.join(","))).unwrap();
                let model = build("gmm", &data, &[("K", k)], &[]);
                let zeta = normal_vec(&mut rng, model.dim());
                let (theta, _) = unpack(model.blocks(), &zeta[..]).unwrap();
                let mixture = model.log_likelihood(&data, &theta, Observations::All).unwrap();
                let brute = enumerate_assignments(&y, theta.block(0), theta.block(1), theta.block(2));
                worst = worst.max((mixture - brute).abs());
                cases += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10,
        format!("{cases} cases, worst error {worst:.1e} (limit 1e-10)"),
    )
}

/// Three separated clusters in 2-D, N = 1000. Each of five restarts runs at
/// most 1e4 iterations; the restart with the highest final ELBO is scored
/// after matching components to true clusters over all label permutations.
fn gmm_fit() -> Outcome {
    let truth = [vec![-4.0, 0.0], vec![4.0, 0.0], vec![0.0, 5.0]];
    let data = synth::mixture(1000, &truth, 0.5, 3).data;
    let model = build(
        "gmm",
        &data,
        &[("K", 3)],
        &[("alpha0", 1.0), ("mu_sigma0", 10.0), ("sigma_sigma0", 1.0)],
    );
    let mut best: Option<(f64, VariationalParams, u64)> = None;
    for seed in 0..5 {
        let config = AdviConfig {
            init: InitMode::Gaussian,
            step_scale: 0.3,
            threshold: 1e-4,
            max_iterations: 10_000,
            seed,
            ..AdviConfig::default()
        };
        let fit = run_advi(&model, &data, &config).unwrap();
        let elbo = fit.trace.last().map_or(f64::NEG_INFINITY, |r| r.elbo);
        if best.as_ref().is_none_or(|(e, _, _)| elbo > *e) {
            best = Some((elbo, fit.params, fit.iterations));
        }
    }
    let (elbo, params, iterations) = best.unwrap();
    let draws = draw_posterior(&model, &params, 1000, &RngStreams::new(0)).unwrap();
    let mean = draws.mean();
    // Columns: 3 weights, then μ row-major (component, coordinate).
    let location = |k: usize| &mean[3 + 2 * k..3 + 2 * k + 2];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let error = perms
        .iter()
        .map(|p| {
            (0..3)
                .map(|k| {
                    let (a, b) = (location(p[k]), &truth[k]);
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
                })
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    outcome(
        error <= 0.1,
        format!("largest location error {error:.4} (limit 0.1), best ELBO {elbo:.1} at {iterations} iterations"),
    )
}

/// Smaller versions of the zoo fixtures. An absolute 1e-12 bound needs
/// log-joints well below 4096 in magnitude, where one ulp is already 1e-12,
/// so the partition check also draws its points at half scale.
fn partition_fixtures() -> Vec<(ZooModel, Dataset)> {
    let mix = synth::mixture(24, &[vec![-2.0, 0.0], vec![2.0, 1.0], vec![0.0, 3.0]], 0.7, 5).data;
    let counts = synth::count_matrix(4, 6, 3, 2.0, 9).train;
    vec![
        ("poisson_exponential", synth::poisson_counts(12, 3.0, 1), vec![], vec![]),
        ("linreg_ard", synth::linreg(24, 0, 4, 2, 1.0, 2).train, vec![], vec![]),
        ("hier_logistic", synth::survey(40, [3, 2, 6, 4, 2], 3), vec![], vec![]),
        ("gamma_poisson_nmf", counts.clone(), vec![("K", 3)], vec![]),
        ("dirichlet_exponential_nmf", counts, vec![("K", 3)], vec![]),
        (
            "gmm",
            mix.clone(),
            vec![("K", 3)],
            vec![("alpha0", 2.0), ("mu_sigma0", 3.0)],
        ),
        ("gmm_minibatch", mix, vec![("K", 3)], vec![("batch_size", 8.0)]),
    ]
    .into_iter()
    .map(|(name, data, dims, hypers)| (build(name, &data, &dims, &hypers), data))
    .collect()
}

/// Scaled minibatch log-joints averaged over a partition equal the full
/// log-joint within 1e-12 absolute; a full-size minibatch run is
/// bit-identical to the full-data run.
fn minibatch_correctness() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let (mut worst, mut largest) = (0.0f64, 0.0f64);
    for (model, data) in partition_fixtures() {
        let n = model.num_observations(&data).unwrap();
        for b in [1, 2, 4, 5] {
            if n % b != 0 {
                continue;
            }
            let zeta: Vec<f64> = normal_vec(&mut rng, model.dim()).iter().map(|z| 0.5 * z).collect();
            let full = log_joint_unconstrained(&model, &data, &zeta).unwrap();
            let parts = n / b;
            let sum: f64 = (0..parts)
                .map(|j| {
                    let batch: Vec<usize> = (j * b..(j + 1) * b).collect();
                    minibatch_log_joint(&model, &data, &batch, &zeta).unwrap()
                })
                .sum();
            worst = worst.max((sum / parts as f64 - full).abs());
            largest = largest.max(full.abs());
        }
    }
    let data = synth::mixture(200, &[vec![-2.0], vec![2.0]], 0.8, 6).data;
    let model = build("gmm", &data, &[("K", 2)], &[("alpha0", 1.0), ("mu_sigma0", 5.0)]);
    let config = AdviConfig {
        seed: 11,
        max_iterations: 500,
        threshold: 1e-12,
        ..AdviConfig::default()
    };
    let full = run_advi(&model, &data, &config).unwrap();
    let batched = run_advi(
        &model,
        &data,
        &AdviConfig {
            minibatch: Some(200),
            ..config
        },
    )
    .unwrap();
    let identical = full.params == batched.params;
    outcome(
        worst <= 1e-12 && identical,
        format!(
            "partition error {worst:.1e} (limit 1e-12, largest |log p| {largest:.0}), B = N run bit-identical: {identical}"
        ),
    )
}

/// D = 50 regressors, 25 of them null, N = 2000 train / 200 held out.
fn ard_behavior() -> Outcome {
    let split = synth::linreg(2000, 200, 50, 25, 1.0, 0);
    let model = build("linreg_ard", &split.train, &[], &[]);
    let fit = run_advi(&model, &split.train, &AdviConfig::default()).unwrap();
    let draws = draw_posterior(&model, &fit.params, 1000, &RngStreams::new(0)).unwrap();
    let w = &draws.mean()[..50];
    let active = w[..25].iter().map(|v| v.abs()).sum::<f64>() / 25.0;
    let null = w[25..].iter().map(|v| v.abs()).sum::<f64>() / 25.0;

    let design = |d: &Dataset| {
        let x = d.real_matrix("x").unwrap();
        (
            DMatrix::from_row_slice(x.rows, x.cols, &x.data),
            DVector::from_vec(d.real_vec("y").unwrap().to_vec()),
        )
    };
    let (x_train, y_train) = design(&split.train);
    let (x_test, y_test) = design(&split.test);
    let rmse = |w: &DVector<f64>| ((&x_test * w - &y_test).norm_squared() / y_test.len() as f64).sqrt();
    let advi_rmse = rmse(&DVector::from_column_slice(w));
    // Ridge at every penalty on a log grid; the best held-out RMSE is the oracle.
    let gram = x_train.transpose() * &x_train;
    let xty = x_train.transpose() * &y_train;
    let ridge_rmse = (-4..=3)
        .map(|e| {
            let a = &gram + DMatrix::identity(50, 50) * 10f64.powi(e);
            rmse(&a.cholesky().unwrap().solve(&xty))
        })
        .fold(f64::INFINITY, f64::min);
    let ratio = null / active;
    let rel = (advi_rmse - ridge_rmse).abs() / ridge_rmse;
    outcome(
        ratio <= 1.0 / 3.0 && rel <= 0.1,
        format!(
            "null/active mean |w| {ratio:.4} (limit 1/3), RMSE {advi_rmse:.4} vs ridge {ridge_rmse:.4}, off by {:.1}% (limit 10%)",
            100.0 * rel
        ),
    )
}

/// Repeated CLI runs with the same seed write byte-identical CSVs.
fn cli_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    fs::write(path("p.json"), r#"{"x":[3,5]}"#).unwrap();
    fs::write(
        path("m.json"),
        synth::mixture(300, &[vec![-3.0, 0.0], vec![3.0, 1.0]], 0.6, 2)
            .data
            .to_json_string(),
    )
    .unwrap();
    let split = synth::linreg(200, 50, 5, 3, 1.0, 4);
    fs::write(path("l.json"), split.train.to_json_string()).unwrap();
    fs::write(path("lh.json"), split.test.to_json_string()).unwrap();
    let runs: Vec<Vec<String>> = vec![
        vec![
            "--model",
            "poisson_exponential",
            "--data",
            &path("p.json"),
            "--seed",
            "42",
        ],
        vec![
            "--model",
            "gmm_minibatch",
            "--data",
            &path("m.json"),
            "--hyper",
            "K=2",
            "--hyper",
            "batch_size=64",
            "--grad-samples",
            "4",
            "--init",
            "gaussian",
            "--max-iters",
            "1000",
            "--seed",
            "5",
        ],
        vec![
            "--model",
            "linreg_ard",
            "--data",
            &path("l.json"),
            "--heldout",
            &path("lh.json"),
            "--seed",
            "1",
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut mismatches = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let (s, e) = (path(&format!("s{i}_{rep}.csv")), path(&format!("e{i}_{rep}.csv")));
            let status = Command::new(env!("CARGO_BIN_EXE_advi"))
                .args(args)
                .args(["--output", &s, "--diagnostic", &e])
                .output()
                .unwrap()
                .status;
            if !status.success() {
                return outcome(false, format!("run {i} exited with {status}"));
            }
            outputs.push((fs::read(&s).unwrap(), fs::read(&e).unwrap()));
        }
        if outputs[0] != outputs[1] {
            mismatches.push(args[1].clone());
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{} configurations repeated, differing: {mismatches:?}", runs.len()),
    )
}

/// Name, check, time limit.
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "gradient oracle, 7 zoo models x 20 points",
            gradient_oracle,
            Some(Duration::from_secs(60)),
        ),
        ("transform suite", transform_suite, Some(Duration::from_secs(30))),
        (
            "gradient estimator unbiasedness",
            estimator_unbiasedness,
            Some(Duration::from_secs(60)),
        ),
        ("standard normal recovery", toy_recovery, None),
        ("Poisson-exponential recovery", poisson_recovery, None),
        ("GMM marginalization oracle", gmm_marginalization, None),
        ("desk-scale GMM fit", gmm_fit, Some(Duration::from_secs(300))),
        ("minibatch correctness", minibatch_correctness, None),
        ("ARD shrinkage and held-out RMSE", ard_behavior, None),
        ("CLI reproducibility", cli_reproducibility, None),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut result = check();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > *limit {
                result.pass = false;
                result
                    .detail
                    .push_str(&format!("; over the {}s time limit", limit.as_secs()));
            }
        }
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {:>2}. {name}: {} ({:.1}s)",
            i + 1,
            result.detail,
            elapsed.as_secs_f64()
        );
        if !result.pass {
            failed += 1;
        }
    }
    println!(
        "{} of {} acceptance criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
