//! Seeded synthetic datasets for the built-in models.
//!
//! Each generator returns the data in the layout its model reads, plus the
//! ground truth where a test needs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson, StandardNormal};

use crate::autodiff::logistic;
use crate::data::{Dataset, Entry, Matrix};

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn poisson_draw<R: Rng>(rng: &mut R, rate: f64) -> i64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as i64
}

/// `n` iid Poisson(rate) counts under the name `x`.
pub fn poisson_counts(n: usize, rate: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let x = (0..n).map(|_| poisson_draw(&mut r, rate)).collect();
    Dataset::new().with("x", Entry::IntArray(x))
}

pub struct LinregData {
    pub train: Dataset,
    pub test: Dataset,
    pub weights: Vec<f64>,
}

/// Gaussian design with `d` regressors of which the first `active` have
/// nonzero weight (magnitude in [1, 3), random sign); the rest are exactly
/// zero. y = x·w + N(0, noise_sd²).
pub fn linreg(n_train: usize, n_test: usize, d: usize, active: usize, noise_sd: f64, seed: u64) -> LinregData {
    assert!(active <= d);
    let mut r = rng(seed);
    let weights: Vec<f64> = (0..d)
        .map(|j| {
            if j < active {
                let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                sign * r.random_range(1.0..3.0)
            } else {
                0.0
            }
        })
        .collect();
    let noise = Normal::new(0.0, noise_sd).expect("finite noise scale");
    let mut split = |n: usize| {
        let x: Vec<f64> = (0..n * d).map(|_| r.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let mean: f64 = x[i * d..(i + 1) * d].iter().zip(&weights).map(|(a, b)| a * b).sum();
                mean + noise.sample(&mut r)
            })
            .collect();
        Dataset::new()
            .with("x", Entry::RealMatrix(Matrix::new(n, d, x)))
            .with("y", Entry::RealArray(y))
    };
    let train = split(n_train);
    let test = split(n_test);
    LinregData { train, test, weights }
}

pub struct MixtureData {
    pub data: Dataset,
    pub labels: Vec<usize>,
}

/// Equal-weight isotropic Gaussian clusters with common scale `sd`,
/// labels drawn uniformly.
pub fn mixture(n: usize, means: &[Vec<f64>], sd: f64, seed: u64) -> MixtureData {
    assert!(!means.is_empty());
    let d = means[0].len();
    let mut r = rng(seed);
    let mut y = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = r.random_range(0..means.len());
        labels.push(k);
        for &m in &means[k] {
            y.push(m + sd * r.sample::<f64, _>(StandardNormal));
        }
    }
    MixtureData {
        data: Dataset::new().with("y", Entry::RealMatrix(Matrix::new(n, d, y))),
        labels,
    }
}

/// Survey-style binary outcomes for the hierarchical logistic model.
/// `sizes` are the group counts for age, edu, age_edu, state, and
/// region_full; the dataset also records them as integers.
pub fn survey(n: usize, sizes: [usize; 5], seed: u64) -> Dataset {
    const NAMES: [(&str, &str); 5] = [
        ("age", "n_age"),
        ("edu", "n_edu"),
        ("age_edu", "n_age_edu"),
        ("state", "n_state"),
        ("region_full", "n_region_full"),
    ];
    let mut r = rng(seed);
    let beta = [-0.5, -1.2, 0.3, 0.8, 0.2];
    let effects: Vec<Vec<f64>> = sizes
        .iter()
        .map(|&m| (0..m).map(|_| 0.5 * r.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut groups: Vec<Vec<i64>> = (0..5).map(|_| Vec::with_capacity(n)).collect();
    let (mut black, mut female, mut v_prev, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let b = f64::from(u8::from(r.random_bool(0.15)));
        let f = f64::from(u8::from(r.random_bool(0.5)));
        let v: f64 = r.sample(StandardNormal);
        let mut eta = beta[0] + beta[1] * b + beta[2] * f + beta[3] * v + beta[4] * f * b;
        for (g, col) in groups.iter_mut().enumerate() {
            let ix = r.random_range(0..sizes[g]);
            eta += effects[g][ix];
            col.push(ix as i64 + 1);
        }
        black.push(b);
        female.push(f);
        v_prev.push(v);
        y.push(i64::from(r.random_bool(logistic(eta))));
    }
    let mut data = Dataset::new()
        .with("black", Entry::RealArray(black))
        .with("female", Entry::RealArray(female))
        .with("v_prev_full", Entry::RealArray(v_prev))
        .with("y", Entry::IntArray(y))
        .with("N", Entry::Int(n as i64));
    for ((col, dim), (ix, &size)) in NAMES.iter().zip(groups.into_iter().zip(&sizes)) {
        data.insert(col, Entry::IntArray(ix));
        data.insert(dim, Entry::Int(size as i64));
    }
    data
}

pub struct CountMatrices {
    pub train: Dataset,
    pub test: Dataset,
}

/// Two independent U×I count matrices from the same rank-`k` rates
/// θ_u·β_i, with θ and β entries drawn from Gamma(shape, 1/shape).
pub fn count_matrix(users: usize, items: usize, k: usize, shape: f64, seed: u64) -> CountMatrices {
    let mut r = rng(seed);
    let g = Gamma::new(shape, 1.0 / shape).expect("positive shape");
    let theta: Vec<f64> = (0..users * k).map(|_| g.sample(&mut r)).collect();
    let beta: Vec<f64> = (0..items * k).map(|_| g.sample(&mut r)).collect();
    let rates: Vec<f64> = (0..users * items)
        .map(|cell| {
            let (u, i) = (cell / items, cell % items);
            (0..k).map(|j| theta[u * k + j] * beta[i * k + j]).sum()
        })
        .collect();
    let mut draw = || {
        let y = rates.iter().map(|&rate| poisson_draw(&mut r, rate)).collect();
        Dataset::new().with("y", Entry::IntMatrix(Matrix::new(users, items, y)))
    };
    let train = draw();
    let test = draw();
    CountMatrices { train, test }
}
