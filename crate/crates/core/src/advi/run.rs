use std::time::{Duration, Instant};

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{AdviError, EvalFailure, ModelError};
use crate::model::Model;

use super::adagrad::WindowedAdagrad;
use super::estimate::{estimate_elbo, estimate_gradients};
use super::rng::{Purpose, RngStreams};
use super::{AdviConfig, InitMode, VariationalParams};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    /// Time since the optimization loop started.
    pub elapsed: Duration,
    pub elbo: f64,
}

/// ELBO estimates recorded every `eval_interval` iterations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ElboTrace {
    pub rows: Vec<TraceRow>,
}

impl ElboTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

#[derive(Clone, Debug)]
pub struct AdviFit {
    pub params: VariationalParams,
    pub trace: ElboTrace,
    /// Iterations actually run.
    pub iterations: u64,
    /// Whether the stopping rule fired before the iteration budget ran out.
    pub converged: bool,
    /// Number of ω coordinates clipped to ±`omega_clamp` over the run.
    pub clamp_events: u64,
    /// Minibatch size used, if any.
    pub batch_size: Option<usize>,
}

/// Resolve the minibatch size: an explicit setting must not exceed N, a
/// model default is capped at N.
fn batch_size<M: Model>(model: &M, data: &Dataset, config: &AdviConfig) -> Result<Option<usize>, AdviError> {
    let requested = match (config.minibatch, model.default_batch_size()) {
        (None, None) => return Ok(None),
        (Some(b), _) => (b, true),
        (None, Some(b)) => (b, false),
    };
    let n = model
        .num_observations(data)
        .ok_or_else(|| AdviError::Config(format!("model `{}` does not support minibatches", model.name())))?;
    if n == 0 {
        return Err(AdviError::Config("minibatching needs at least one observation".into()));
    }
    match requested {
        (b, true) if b > n => Err(AdviError::Config(format!(
            "minibatch size {b} exceeds the {n} observations"
        ))),
        (b, _) => Ok(Some(b.min(n))),
    }
}

fn initial_params(dim: usize, mode: InitMode, streams: &RngStreams) -> VariationalParams {
    match mode {
        InitMode::Zero => VariationalParams::zeros(dim),
        InitMode::Gaussian => {
            let mut rng = streams.stream(Purpose::Init, 0, 0);
            let mu = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            VariationalParams::new(mu, vec![0.0; dim])
        }
    }
}

/// Sorted uniform subset of `b` of the `n` observations, without replacement.
pub fn draw_minibatch(streams: &RngStreams, iteration: u64, n: usize, b: usize) -> Vec<usize> {
    let mut rng = streams.stream(Purpose::Minibatch, iteration, 0);
    let mut batch = index::sample(&mut rng, n, b).into_vec();
    batch.sort_unstable();
    batch
}

/// Fit a mean-field Gaussian in the unconstrained space by stochastic
/// gradient ascent on the ELBO.
///
/// Iteration `i` (from 1) draws its gradient samples, and its minibatch if
/// any, from substreams keyed by `i`. The step for coordinate k is
/// ρ_k·g_k (ρ from the windowed adagrad rule, see
/// [`AdviConfig::lagged_step_size`]), capped at ±`step_clip·step_scale` and
/// scaled by i^(-1/2+1e-16) when `step_decay` is set. Every
/// `eval_interval` iterations the ELBO is estimated on the full data, and
/// the run stops once the relative change from the previous estimate falls
/// below `threshold`.
pub fn run_advi<M: Model>(model: &M, data: &Dataset, config: &AdviConfig) -> Result<AdviFit, AdviError> {
    config.validate().map_err(AdviError::Config)?;
    model.check_data(data)?;
    for spec in model.blocks() {
        spec.validate().map_err(ModelError::from)?;
    }
    let batch_size = batch_size(model, data, config)?;
    let n_obs = model.num_observations(data).unwrap_or(0);
    let dim = model.dim();
    let streams = RngStreams::new(config.seed);
    let mut params = initial_params(dim, config.init, &streams);

    let mut ada_mu = WindowedAdagrad::new(dim, config.window);
    let mut ada_omega = WindowedAdagrad::new(dim, config.window);
    let mut trace = ElboTrace::default();
    let mut clamp_events = 0u64;
    let mut converged = false;
    let mut iterations = 0;
    let start = Instant::now();

    let fail = |iteration: u64, reason: EvalFailure, params: &VariationalParams| AdviError::Evaluation {
        iteration,
        reason,
        mu: params.mu.clone(),
        omega: params.omega.clone(),
    };

    for i in 1..=config.max_iterations {
        iterations = i;
        let batch = batch_size.map(|b| draw_minibatch(&streams, i, n_obs, b));
        let grad = estimate_gradients(model, data, &params, config.grad_samples, &streams, i, batch.as_deref())
            .map_err(|e| fail(i, e, &params))?;
        let (rho_mu, rho_omega) = if config.lagged_step_size && !ada_mu.is_empty() {
            let rates = (
                ada_mu.rates(config.step_scale, config.step_offset),
                ada_omega.rates(config.step_scale, config.step_offset),
            );
            ada_mu.push(&grad.mu);
            ada_omega.push(&grad.omega);
            rates
        } else {
            (
                ada_mu.step(&grad.mu, config.step_scale, config.step_offset),
                ada_omega.step(&grad.omega, config.step_scale, config.step_offset),
            )
        };
        let decay = if config.step_decay {
            (i as f64).powf(-0.5 + 1e-16)
        } else {
            1.0
        };
        let cap = config.step_clip * config.step_scale;
        for k in 0..dim {
            params.mu[k] += decay * (rho_mu[k] * grad.mu[k]).clamp(-cap, cap);
            let w = params.omega[k] + decay * (rho_omega[k] * grad.omega[k]).clamp(-cap, cap);
            let clamped = w.clamp(-config.omega_clamp, config.omega_clamp);
            if clamped != w {
                clamp_events += 1;
            }
            params.omega[k] = clamped;
        }
        if !params.is_finite() {
            return Err(fail(i, EvalFailure::NonFiniteGradient, &params));
        }

        if i % config.eval_interval == 0 {
            let elbo = estimate_elbo(model, data, &params, config.elbo_samples, &streams, i)
                .map_err(|e| fail(i, e, &params))?;
            let previous = trace.last().map(|r| r.elbo);
            trace.rows.push(TraceRow {
                iteration: i,
                elapsed: start.elapsed(),
                elbo,
            });
            if let Some(prev) = previous {
                if ((elbo - prev) / prev).abs() < config.threshold {
                    converged = true;
                    break;
                }
            }
        }
    }

    Ok(AdviFit {
        params,
        trace,
        iterations,
        converged,
        clamp_events,
        batch_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Entry;
    use crate::zoo::{make_model, Dims, Hypers};

    fn toy() -> crate::zoo::ZooModel {
        make_model("std_normal", &Hypers::new(), &Dims::new()).unwrap()
    }

    #[test]
    fn zero_budget_returns_init() {
        let config = AdviConfig {
            max_iterations: 0,
            ..AdviConfig::default()
        };
        let fit = run_advi(&toy(), &Dataset::new(), &config).unwrap();
        assert_eq!(fit.params, VariationalParams::zeros(1));
        assert!(fit.trace.is_empty());
        assert_eq!(fit.iterations, 0);
    }

    #[test]
    fn gaussian_init_is_seeded() {
        let config = AdviConfig {
            max_iterations: 0,
            init: InitMode::Gaussian,
            seed: 3,
            ..AdviConfig::default()
        };
        let a = run_advi(&toy(), &Dataset::new(), &config).unwrap();
        let b = run_advi(&toy(), &Dataset::new(), &config).unwrap();
        assert_eq!(a.params, b.params);
        assert!(a.params.mu[0] != 0.0);
        assert_eq!(a.params.omega, vec![0.0]);
    }

    #[test]
    fn oversized_minibatch_is_rejected() {
        let model = make_model("poisson_exponential", &Hypers::new(), &Dims::new()).unwrap();
        let data = Dataset::new().with("x", Entry::IntArray(vec![3, 5]));
        let config = AdviConfig {
            minibatch: Some(3),
            ..AdviConfig::default()
        };
        assert!(matches!(run_advi(&model, &data, &config), Err(AdviError::Config(_))));
    }

    #[test]
    fn minibatch_draws_are_sorted_and_distinct() {
        let s = RngStreams::new(1);
        let b = draw_minibatch(&s, 4, 100, 30);
        assert_eq!(b.len(), 30);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(draw_minibatch(&s, 4, 5, 5), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn trace_iterations_increase() {
        let config = AdviConfig {
            max_iterations: 500,
            threshold: 1e-12,
            ..AdviConfig::default()
        };
        let fit = run_advi(&toy(), &Dataset::new(), &config).unwrap();
        let its: Vec<u64> = fit.trace.rows.iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![100, 200, 300, 400, 500]);
    }
}
