use crate::autodiff::Real;
use crate::data::Dataset;
use crate::densities;
use crate::error::ModelError;
use crate::model::{indices, Model, Observations};
use crate::transforms::{BlockSpec, Constrained, TransformKind};

use super::Params;

/// θ ~ N(mu, sigma) with no data; the ELBO and its gradients are known in
/// closed form.
#[derive(Clone, Debug)]
pub struct StdNormal {
    blocks: Vec<BlockSpec>,
    pub mu: f64,
    pub sigma: f64,
}

impl StdNormal {
    pub(crate) fn from_params(p: &mut Params<'_>) -> Result<Self, ModelError> {
        Ok(StdNormal {
            blocks: vec![BlockSpec::scalar("theta", TransformKind::Identity { dim: 1 })],
            mu: p.hyper("mu", 0.0)?,
            sigma: p.positive("sigma", 1.0)?,
        })
    }
}

impl Model for StdNormal {
    fn name(&self) -> &str {
        "std_normal"
    }

    fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    fn check_data(&self, _data: &Dataset) -> Result<(), ModelError> {
        Ok(())
    }

    fn num_observations(&self, _data: &Dataset) -> Option<usize> {
        Some(0)
    }

    fn log_prior<T: Real>(&self, _data: &Dataset, theta: &Constrained<T>) -> Result<T, ModelError> {
        Ok(densities::normal(
            theta.scalar(0),
            T::from(self.mu),
            T::from(self.sigma),
        )?)
    }

    fn log_likelihood_terms<T: Real>(
        &self,
        _data: &Dataset,
        _theta: &Constrained<T>,
        _obs: Observations<'_>,
    ) -> Result<Vec<T>, ModelError> {
        Ok(Vec::new())
    }
}

/// λ ~ Exponential(rate), x_n ~ Poisson(λ).
#[derive(Clone, Debug)]
pub struct PoissonExponential {
    blocks: Vec<BlockSpec>,
    pub rate: f64,
}

impl PoissonExponential {
    pub(crate) fn from_params(p: &mut Params<'_>) -> Result<Self, ModelError> {
        Ok(PoissonExponential {
            blocks: vec![BlockSpec::scalar(
                "lambda",
                TransformKind::LowerBound { lower: 0.0, dim: 1 },
            )],
            rate: p.positive("rate", 1.0)?,
        })
    }

    fn counts(data: &Dataset) -> Result<Vec<f64>, ModelError> {
        if !data.contains("x") {
            return Ok(Vec::new());
        }
        let x = data.int_vec("x")?;
        if let Some(bad) = x.iter().find(|&&v| v < 0) {
            return Err(super::shape_error("x", format!("count {bad} is negative")));
        }
        Ok(x.iter().map(|&v| v as f64).collect())
    }
}

impl Model for PoissonExponential {
    fn name(&self) -> &str {
        "poisson_exponential"
    }

    fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    fn check_data(&self, data: &Dataset) -> Result<(), ModelError> {
        Self::counts(data).map(|_| ())
    }

    fn num_observations(&self, data: &Dataset) -> Option<usize> {
        Self::counts(data).ok().map(|x| x.len())
    }

    fn log_prior<T: Real>(&self, _data: &Dataset, theta: &Constrained<T>) -> Result<T, ModelError> {
        Ok(densities::exponential(theta.scalar(0), T::from(self.rate))?)
    }

    fn log_likelihood_terms<T: Real>(
        &self,
        data: &Dataset,
        theta: &Constrained<T>,
        obs: Observations<'_>,
    ) -> Result<Vec<T>, ModelError> {
        let x = Self::counts(data)?;
        let lambda = theta.scalar(0);
        let terms = indices(obs, x.len())
            .map(|n| densities::poisson(x[n], lambda))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(terms)
    }
}
