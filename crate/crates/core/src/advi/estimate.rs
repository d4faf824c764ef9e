use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{AdviError, EvalFailure};
use crate::model::{log_joint_gradient, log_joint_unconstrained, Model};

use super::rng::{Purpose, RngStreams};
use super::VariationalParams;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Redraws allowed per gradient sample after a non-finite evaluation.
pub const MAX_REDRAWS: usize = 10;

/// ζ = exp(ω) ⊙ η + μ.
pub fn inverse_standardize(params: &VariationalParams, eta: &[f64]) -> Result<Vec<f64>, AdviError> {
    if eta.len() != params.dim() {
        return Err(AdviError::Config(format!(
            "standardized draw has {} entries, expected {}",
            eta.len(),
            params.dim()
        )));
    }
    Ok(eta
        .iter()
        .zip(params.mu.iter().zip(&params.omega))
        .map(|(&e, (&m, &w))| w.exp() * e + m)
        .collect())
}

/// Entropy of the mean-field Gaussian: K/2·(1 + log 2π) + Σ ω_k.
pub fn gaussian_entropy(params: &VariationalParams) -> f64 {
    0.5 * params.dim() as f64 * (1.0 + LN_2PI) + params.omega.iter().sum::<f64>()
}

fn standard_normal<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Monte Carlo ELBO over the full dataset. Non-finite draws are dropped;
/// the estimate fails only when every draw is non-finite.
pub fn estimate_elbo<M: Model>(
    model: &M,
    data: &Dataset,
    params: &VariationalParams,
    n_samples: usize,
    streams: &RngStreams,
    iteration: u64,
) -> Result<f64, EvalFailure> {
    assert!(n_samples >= 1, "n_samples must be at least 1");
    let values: Vec<Result<f64, EvalFailure>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = streams.stream(Purpose::Elbo, iteration, s as u64);
            let eta = standard_normal(&mut rng, params.dim());
            let zeta = inverse_standardize(params, &eta).expect("dimension matches");
            log_joint_unconstrained(model, data, &zeta[..])
        })
        .collect();
    let mut total = 0.0;
    let mut count = 0usize;
    let mut last_err = None;
    for v in values {
        match v {
            Ok(x) => {
                total += x;
                count += 1;
            }
            Err(e) => last_err = Some(e),
        }
    }
    if count == 0 {
        return Err(last_err.expect("at least one sample"));
    }
    Ok(total / count as f64 + gaussian_entropy(params))
}

/// Monte Carlo gradients of the ELBO with respect to μ and ω.
#[derive(Clone, Debug, PartialEq)]
pub struct ElboGradient {
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
}

/// Average M single-draw estimates of ∇μ and ∇ω.
///
/// For each draw η ~ N(0, I) and ζ = exp(ω)⊙η + μ, one backward pass gives
/// g = ∇ζ[log p(X, T⁻¹(ζ)) + log|det J|]; then ∇μ ≈ g and
/// ∇ω ≈ g ⊙ η ⊙ exp(ω) + 1. A draw whose evaluation is non-finite is redrawn
/// from the same substream up to [`MAX_REDRAWS`] times. With `batch` set,
/// the log-joint is the scaled minibatch version.
pub fn estimate_gradients<M: Model>(
    model: &M,
    data: &Dataset,
    params: &VariationalParams,
    grad_samples: usize,
    streams: &RngStreams,
    iteration: u64,
    batch: Option<&[usize]>,
) -> Result<ElboGradient, EvalFailure> {
    assert!(grad_samples >= 1, "grad_samples must be at least 1");
    let dim = params.dim();
    let sigma = params.sigma();
    // (∇ζ, η) for one draw.
    type Sample = Result<(Vec<f64>, Vec<f64>), EvalFailure>;
    let one_sample = |m: usize| -> Sample {
        let mut rng = streams.stream(Purpose::Gradient, iteration, m as u64);
        let mut last = None;
        for _ in 0..=MAX_REDRAWS {
            let eta = standard_normal(&mut rng, dim);
            let zeta = inverse_standardize(params, &eta).expect("dimension matches");
            match log_joint_gradient(model, data, &zeta, batch) {
                Ok((_, grad)) => return Ok((grad, eta)),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    };
    let samples: Vec<Sample> = if grad_samples == 1 {
        vec![one_sample(0)]
    } else {
        (0..grad_samples).into_par_iter().map(one_sample).collect()
    };

    let mut g_mu = vec![0.0; dim];
    let mut g_omega = vec![0.0; dim];
    for sample in samples {
        let (grad, eta) = sample?;
        for k in 0..dim {
            g_mu[k] += grad[k];
            g_omega[k] += grad[k] * eta[k] * sigma[k];
        }
    }
    let m = grad_samples as f64;
    g_mu.iter_mut().for_each(|g| *g /= m);
    g_omega.iter_mut().for_each(|g| *g = *g / m + 1.0);
    Ok(ElboGradient {
        mu: g_mu,
        omega: g_omega,
    })
}
