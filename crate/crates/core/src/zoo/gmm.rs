use std::borrow::Cow;

use crate::autodiff::Real;
use crate::data::{Dataset, Matrix};
use crate::densities;
use crate::error::ModelError;
use crate::model::{indices, Model, Observations};
use crate::transforms::{BlockSpec, Constrained, TransformKind};

use super::{shape_error, Params};

const WEIGHTS: usize = 0;
const MU: usize = 1;
const SIGMA: usize = 2;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian mixture with the component assignments summed out.
///
/// ```text
/// θ ~ Dirichlet(alpha0·1)
/// μ_kd ~ N(0, mu_sigma0)      σ_kd ~ logNormal(0, sigma_sigma0)
/// log p(y_n) = log Σ_k θ_k Π_d N(y_nd | μ_kd, σ_kd)
/// ```
///
/// The minibatch variant differs only in asking for a default batch size.
#[derive(Clone, Debug)]
pub struct Gmm {
    blocks: Vec<BlockSpec>,
    pub k: usize,
    pub d: usize,
    pub alpha0: f64,
    pub mu_sigma0: f64,
    pub sigma_sigma0: f64,
    pub batch_size: Option<usize>,
}

impl Gmm {
    pub(crate) fn from_params(p: &mut Params<'_>, minibatch: bool) -> Result<Self, ModelError> {
        let k = p.dim("K", None)?;
        let d = p.dim("D", None)?;
        if k < 2 {
            return Err(ModelError::Config("a mixture needs K >= 2 components".into()));
        }
        let batch_size = if minibatch {
            let b = p.positive("batch_size", 500.0)?;
            if b.fract() != 0.0 {
                return Err(ModelError::Config(format!("batch_size {b} is not an integer")));
            }
            Some(b as usize)
        } else {
            None
        };
        Ok(Gmm {
            blocks: vec![
                BlockSpec::vector("theta", TransformKind::Simplex { k }),
                BlockSpec::array("mu", k, TransformKind::Identity { dim: d }),
                BlockSpec::array("sigma", k, TransformKind::LowerBound { lower: 0.0, dim: d }),
            ],
            k,
            d,
            alpha0: p.positive("alpha0", 10_000.0)?,
            mu_sigma0: p.positive("mu_sigma0", 0.1)?,
            sigma_sigma0: p.positive("sigma_sigma0", 0.1)?,
            batch_size,
        })
    }

    fn points<'d>(&self, data: &'d Dataset) -> Result<Cow<'d, Matrix<f64>>, ModelError> {
        let y = data.real_matrix("y")?;
        if y.cols != self.d {
            return Err(shape_error(
                "y",
                format!("has {} columns, model expects D = {}", y.cols, self.d),
            ));
        }
        Ok(y)
    }
}

impl Model for Gmm {
    fn name(&self) -> &str {
        if self.batch_size.is_some() {
            "gmm_minibatch"
        } else {
            "gmm"
        }
    }

    fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    fn check_data(&self, data: &Dataset) -> Result<(), ModelError> {
        self.points(data).map(|_| ())
    }

    fn num_observations(&self, data: &Dataset) -> Option<usize> {
        self.points(data).ok().map(|y| y.rows)
    }

    fn default_batch_size(&self) -> Option<usize> {
        self.batch_size
    }

    fn log_prior<T: Real>(&self, _data: &Dataset, theta: &Constrained<T>) -> Result<T, ModelError> {
        let alpha = vec![T::from(self.alpha0); self.k];
        let mut terms = Vec::with_capacity(1 + 2 * self.k * self.d);
        terms.push(densities::dirichlet(theta.block(WEIGHTS), &alpha)?);
        let (zero, mu_scale, sigma_scale) = (T::from(0.0), T::from(self.mu_sigma0), T::from(self.sigma_sigma0));
        for &m in theta.block(MU) {
            terms.push(densities::normal(m, zero, mu_scale)?);
        }
        for &s in theta.block(SIGMA) {
            terms.push(densities::lognormal(s, zero, sigma_scale)?);
        }
        Ok(T::sum(&terms))
    }

    fn log_likelihood_terms<T: Real>(
        &self,
        data: &Dataset,
        theta: &Constrained<T>,
        obs: Observations<'_>,
    ) -> Result<Vec<T>, ModelError> {
        let y = self.points(data)?;
        let weights = theta.block(WEIGHTS);
        let mu = theta.block(MU);
        let sigma = theta.block(SIGMA);
        if let Some(s) = sigma.iter().find(|s| !(s.value() > 0.0)) {
            return Err(ModelError::Config(format!(
                "component scale {} is not positive",
                s.value()
            )));
        }
        // Per component: log θ_k − Σ_d log σ_kd − D/2·log 2π, and 1/σ_kd.
        let inv_sigma: Vec<T> = sigma.iter().map(|&s| T::from(1.0) / s).collect();
        let offsets: Vec<T> = (0..self.k)
            .map(|k| {
                let log_sigmas: Vec<T> = sigma[k * self.d..(k + 1) * self.d].iter().map(|&s| s.ln()).collect();
                weights[k].ln() - T::sum(&log_sigmas) - self.d as f64 * HALF_LN_2PI
            })
            .collect();
        let mut per_component = Vec::with_capacity(self.k);
        let mut squares = Vec::with_capacity(self.d);
        let terms = indices(obs, y.rows)
            .map(|n| {
                per_component.clear();
                let row = y.row(n);
                for (k, &offset) in offsets.iter().enumerate() {
                    squares.clear();
                    for (d, &x) in row.iter().enumerate() {
                        let j = k * self.d + d;
                        squares.push(((mu[j] - x) * inv_sigma[j]).square());
                    }
                    per_component.push(offset - T::sum(&squares) * 0.5);
                }
                T::log_sum_exp(&per_component)
            })
            .collect();
        Ok(terms)
    }
}
