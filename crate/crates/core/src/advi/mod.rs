//! The ADVI optimizer: standardization, Monte Carlo estimators of the ELBO
//! and its gradients, adaptive step sizes, and posterior sampling.

mod adagrad;
mod draws;
mod estimate;
mod rng;
mod run;

use serde::{Deserialize, Serialize};

pub use adagrad::WindowedAdagrad;
pub use draws::{draw_posterior, PosteriorDraws};
pub use estimate::{estimate_elbo, estimate_gradients, gaussian_entropy, inverse_standardize, ElboGradient};
pub use rng::{Purpose, RngStreams};
pub use run::{draw_minibatch, run_advi, AdviFit, ElboTrace, TraceRow};

/// Mean-field Gaussian over ζ: mean μ and log standard deviation ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalParams {
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
}

impl VariationalParams {
    pub fn zeros(dim: usize) -> Self {
        VariationalParams {
            mu: vec![0.0; dim],
            omega: vec![0.0; dim],
        }
    }

    pub fn new(mu: Vec<f64>, omega: Vec<f64>) -> Self {
        assert_eq!(mu.len(), omega.len(), "mu and omega lengths differ");
        VariationalParams { mu, omega }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w.exp()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.mu.iter().chain(&self.omega).all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// μ = 0, ω = 0.
    Zero,
    /// μ drawn from a standard Gaussian, ω = 0.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdviConfig {
    /// Monte Carlo draws per gradient estimate (M).
    pub grad_samples: usize,
    /// Draws per ELBO estimate.
    pub elbo_samples: usize,
    /// Numerator of the adaptive step size.
    pub step_scale: f64,
    /// Offset τ in the step-size denominator.
    pub step_offset: f64,
    /// Iterations of squared-gradient history.
    pub window: usize,
    /// Take iteration i's step sizes from the squared gradients of the
    /// iterations before it (the first iteration, having no history, uses
    /// its own gradient). Including the current gradient correlates the
    /// step with its own noise and biases the fixed point (ω settles about
    /// 0.065 above the optimum on a standard normal target).
    pub lagged_step_size: bool,
    /// With lagged step sizes, each coordinate's update is capped at
    /// `step_clip · step_scale` (before decay), so a gradient far larger
    /// than its recent history cannot throw the iterate away. Without lag
    /// the update is already below `step_scale`.
    pub step_clip: f64,
    /// Multiply each step by i^(-1/2 + 1e-16) so the sequence decreases.
    pub step_decay: bool,
    /// Stop when the relative ELBO change drops below this.
    pub threshold: f64,
    pub eval_interval: u64,
    pub max_iterations: u64,
    pub seed: u64,
    /// Observations per minibatch; `None` uses the whole dataset unless the
    /// model asks for a default.
    pub minibatch: Option<usize>,
    pub init: InitMode,
    /// ω is clamped to ±this after each update.
    pub omega_clamp: f64,
}

impl Default for AdviConfig {
    fn default() -> Self {
        AdviConfig {
            grad_samples: 1,
            elbo_samples: 100,
            step_scale: 0.1,
            step_offset: 1.0,
            window: 10,
            lagged_step_size: true,
            step_clip: 2.0,
            step_decay: true,
            threshold: 0.01,
            eval_interval: 100,
            max_iterations: 10_000,
            seed: 0,
            minibatch: None,
            init: InitMode::Zero,
            omega_clamp: 20.0,
        }
    }
}

impl AdviConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.grad_samples < 1 {
            return Err("grad_samples must be at least 1".into());
        }
        if self.elbo_samples < 1 {
            return Err("elbo_samples must be at least 1".into());
        }
        if self.window < 1 {
            return Err("window must be at least 1".into());
        }
        if !(self.threshold > 0.0) {
            return Err(format!("threshold {} must be positive", self.threshold));
        }
        if !(self.step_scale > 0.0) || !(self.step_offset >= 0.0) {
            return Err("step sizes must be positive".into());
        }
        if !(self.step_clip > 0.0) {
            return Err("step_clip must be positive".into());
        }
        if self.eval_interval < 1 {
            return Err("eval_interval must be at least 1".into());
        }
        if self.minibatch == Some(0) {
            return Err("minibatch size must be at least 1".into());
        }
        if !(self.omega_clamp > 0.0) {
            return Err("omega_clamp must be positive".into());
        }
        Ok(())
    }
}
