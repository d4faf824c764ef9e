//! The differentiable model interface and the transformed log-joint.

use crate::autodiff::{Graph, Real};
use crate::data::Dataset;
use crate::error::{EvalFailure, ModelError};
use crate::transforms::{unpack, BlockSpec, Constrained};

/// Which likelihood terms to include.
#[derive(Clone, Copy, Debug)]
pub enum Observations<'a> {
    All,
    /// Zero-based observation indices.
    Subset(&'a [usize]),
}

/// A probability model over continuous latent blocks.
///
/// Implementations split the log-joint into a prior part and a likelihood
/// that factorizes over observations, which is what makes minibatch
/// scaling valid. The log-Jacobian of the block transforms is added by the
/// caller, never by the model.
pub trait Model: Sync {
    fn name(&self) -> &str;

    fn blocks(&self) -> &[BlockSpec];

    /// Dimension K of the unconstrained space.
    fn dim(&self) -> usize {
        self.blocks().iter().map(BlockSpec::unconstrained_dim).sum()
    }

    /// Check that `data` has every entry this model reads, with matching
    /// shapes.
    fn check_data(&self, data: &Dataset) -> Result<(), ModelError>;

    /// Number of independent likelihood terms, or `None` if the likelihood
    /// does not factorize over observations.
    fn num_observations(&self, data: &Dataset) -> Option<usize>;

    /// Minibatch size this model asks for when the run does not set one.
    fn default_batch_size(&self) -> Option<usize> {
        None
    }

    fn log_prior<T: Real>(&self, data: &Dataset, theta: &Constrained<T>) -> Result<T, ModelError>;

    /// One log-likelihood value per selected observation, in selection
    /// order.
    fn log_likelihood_terms<T: Real>(
        &self,
        data: &Dataset,
        theta: &Constrained<T>,
        obs: Observations<'_>,
    ) -> Result<Vec<T>, ModelError>;

    fn log_likelihood<T: Real>(
        &self,
        data: &Dataset,
        theta: &Constrained<T>,
        obs: Observations<'_>,
    ) -> Result<T, ModelError> {
        Ok(T::sum(&self.log_likelihood_terms(data, theta, obs)?))
    }
}

/// Iterate the indices selected by `obs` out of `n`.
pub(crate) fn indices<'a>(obs: Observations<'a>, n: usize) -> Box<dyn Iterator<Item = usize> + 'a> {
    match obs {
        Observations::All => Box::new(0..n),
        Observations::Subset(ix) => Box::new(ix.iter().copied()),
    }
}

fn model_failure(e: ModelError) -> EvalFailure {
    EvalFailure::Model(e.to_string())
}

/// log p(X, T⁻¹(ζ)) + log|det J_{T⁻¹}(ζ)|.
pub fn log_joint_unconstrained<M: Model, T: Real>(model: &M, data: &Dataset, zeta: &[T]) -> Result<T, EvalFailure> {
    let (theta, log_det) = unpack(model.blocks(), zeta).map_err(|e| EvalFailure::Model(e.to_string()))?;
    let prior = model.log_prior(data, &theta).map_err(model_failure)?;
    let lik = model
        .log_likelihood(data, &theta, Observations::All)
        .map_err(model_failure)?;
    finite(prior + lik + log_det)
}

/// log prior + log_det + (N/B)·Σ_{n∈batch} log-likelihood term n.
pub fn minibatch_log_joint<M: Model, T: Real>(
    model: &M,
    data: &Dataset,
    batch: &[usize],
    zeta: &[T],
) -> Result<T, EvalFailure> {
    let n = model
        .num_observations(data)
        .ok_or_else(|| EvalFailure::Model(format!("model `{}` does not factorize", model.name())))?;
    validate_batch(batch, n).map_err(model_failure)?;
    let (theta, log_det) = unpack(model.blocks(), zeta).map_err(|e| EvalFailure::Model(e.to_string()))?;
    let prior = model.log_prior(data, &theta).map_err(model_failure)?;
    let lik = model
        .log_likelihood(data, &theta, Observations::Subset(batch))
        .map_err(model_failure)?;
    let scale = n as f64 / batch.len() as f64;
    finite(prior + lik * scale + log_det)
}

pub(crate) fn validate_batch(batch: &[usize], n: usize) -> Result<(), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Config("minibatch is empty".into()));
    }
    if batch.len() > n {
        return Err(ModelError::Config(format!(
            "minibatch of {} exceeds {n} observations",
            batch.len()
        )));
    }
    if let Some(bad) = batch.iter().find(|&&i| i >= n) {
        return Err(ModelError::Config(format!(
            "minibatch index {bad} out of range for {n} observations"
        )));
    }
    Ok(())
}

fn finite<T: Real>(v: T) -> Result<T, EvalFailure> {
    if v.value().is_finite() {
        Ok(v)
    } else {
        Err(EvalFailure::NonFinite(v.value()))
    }
}

/// Value and ζ-gradient of the transformed log-joint, optionally on a
/// minibatch, from one backward pass on a fresh graph.
pub fn log_joint_gradient<M: Model>(
    model: &M,
    data: &Dataset,
    zeta: &[f64],
    batch: Option<&[usize]>,
) -> Result<(f64, Vec<f64>), EvalFailure> {
    let graph = Graph::new();
    let leaves = graph.variables(zeta)?;
    let out = match batch {
        Some(b) => minibatch_log_joint(model, data, b, &leaves),
        None => log_joint_unconstrained(model, data, &leaves),
    };
    if let Some(err) = graph.take_error() {
        return Err(err.into());
    }
    let out = out?;
    let grad = graph.backward(&out);
    let partials: Vec<f64> = leaves.iter().map(|v| grad.wrt(v)).collect();
    if partials.iter().any(|g| !g.is_finite()) {
        return Err(EvalFailure::NonFiniteGradient);
    }
    Ok((out.value(), partials))
}

/// Per-observation log-likelihood at plain parameter values.
pub fn pointwise_log_likelihood<M: Model>(
    model: &M,
    data: &Dataset,
    theta: &Constrained<f64>,
) -> Result<Vec<f64>, ModelError> {
    if model.num_observations(data).is_none() {
        return Err(ModelError::Config(format!(
            "model `{}` has no per-observation likelihood",
            model.name()
        )));
    }
    model.log_likelihood_terms(data, theta, Observations::All)
}
