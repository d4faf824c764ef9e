use std::borrow::Cow;

use crate::autodiff::Real;
use crate::data::{Dataset, Matrix};
use crate::densities;
use crate::error::ModelError;
use crate::model::{indices, Model, Observations};
use crate::transforms::{BlockSpec, Constrained, TransformKind};

use super::{shape_error, Params};

const W: usize = 0;
const SIGMA2: usize = 1;
const ALPHA: usize = 2;

/// Linear regression with automatic relevance determination.
///
/// ```text
/// α_d ~ Gamma(c0, d0)          σ² ~ InvGamma(a0, b0)
/// w_d ~ N(0, σ / √α_d)         y_n ~ N(x_n·w, σ)
/// ```
///
/// Data: `x` (N×D real matrix), `y` (length N).
#[derive(Clone, Debug)]
pub struct LinregArd {
    blocks: Vec<BlockSpec>,
    pub d: usize,
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    pub d0: f64,
}

impl LinregArd {
    pub(crate) fn from_params(p: &mut Params<'_>) -> Result<Self, ModelError> {
        let d = p.dim("D", None)?;
        Ok(LinregArd {
            blocks: vec![
                BlockSpec::vector("w", TransformKind::Identity { dim: d }),
                BlockSpec::scalar("sigma2", TransformKind::LowerBound { lower: 0.0, dim: 1 }),
                BlockSpec::vector("alpha", TransformKind::LowerBound { lower: 0.0, dim: d }),
            ],
            d,
            a0: p.positive("a0", 1.0)?,
            b0: p.positive("b0", 1.0)?,
            c0: p.positive("c0", 1.0)?,
            d0: p.positive("d0", 1.0)?,
        })
    }

    #[allow(clippy::type_complexity)]
    fn design<'d>(&self, data: &'d Dataset) -> Result<(Cow<'d, Matrix<f64>>, Cow<'d, [f64]>), ModelError> {
        let x = data.real_matrix("x")?;
        let y = data.real_vec("y")?;
        if x.cols != self.d {
            return Err(shape_error(
                "x",
                format!("has {} columns, model expects D = {}", x.cols, self.d),
            ));
        }
        if y.len() != x.rows {
            return Err(shape_error(
                "y",
                format!("has {} entries but x has {} rows", y.len(), x.rows),
            ));
        }
        Ok((x, y))
    }
}

impl Model for LinregArd {
    fn name(&self) -> &str {
        "linreg_ard"
    }

    fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    fn check_data(&self, data: &Dataset) -> Result<(), ModelError> {
        self.design(data).map(|_| ())
    }

    fn num_observations(&self, data: &Dataset) -> Option<usize> {
        self.design(data).ok().map(|(x, _)| x.rows)
    }

    fn log_prior<T: Real>(&self, _data: &Dataset, theta: &Constrained<T>) -> Result<T, ModelError> {
        let sigma2 = theta.scalar(SIGMA2);
        let sigma = sigma2.sqrt();
        let mut terms = Vec::with_capacity(2 * self.d + 1);
        terms.push(densities::inverse_gamma(sigma2, T::from(self.a0), T::from(self.b0))?);
        for (&w, &alpha) in theta.block(W).iter().zip(theta.block(ALPHA)) {
            terms.push(densities::gamma(alpha, T::from(self.c0), T::from(self.d0))?);
            terms.push(densities::normal(w, T::from(0.0), sigma / alpha.sqrt())?);
        }
        Ok(T::sum(&terms))
    }

    fn log_likelihood_terms<T: Real>(
        &self,
        data: &Dataset,
        theta: &Constrained<T>,
        obs: Observations<'_>,
    ) -> Result<Vec<T>, ModelError> {
        let (x, y) = self.design(data)?;
        let w = theta.block(W);
        let sigma = theta.scalar(SIGMA2).sqrt();
        let terms = indices(obs, x.rows)
            .map(|n| densities::normal(T::from(y[n]), T::weighted_sum(x.row(n), w), sigma))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(terms)
    }
}
