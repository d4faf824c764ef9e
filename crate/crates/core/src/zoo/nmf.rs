//! Poisson matrix factorization with two prior families. Observations are
//! the cells of the U×I count matrix `y`, numbered row-major.

use crate::autodiff::Real;
use crate::data::{Dataset, Matrix};
use crate::densities;
use crate::error::ModelError;
use crate::model::{indices, Model, Observations};
use crate::transforms::{BlockSpec, Constrained, TransformKind};

use super::{shape_error, Params};

const THETA: usize = 0;
const BETA: usize = 1;

fn counts(data: &Dataset, users: usize, items: usize) -> Result<&Matrix<i64>, ModelError> {
    let y = data.int_matrix("y")?;
    if (y.rows, y.cols) != (users, items) {
        return Err(shape_error(
            "y",
            format!("is {}x{}, model expects {users}x{items}", y.rows, y.cols),
        ));
    }
    if let Some(bad) = y.data.iter().find(|&&v| v < 0) {
        return Err(shape_error("y", format!("count {bad} is negative")));
    }
    Ok(y)
}

fn cell_terms<T: Real>(y: &Matrix<i64>, theta: &Constrained<T>, obs: Observations<'_>) -> Result<Vec<T>, ModelError> {
    indices(obs, y.rows * y.cols)
        .map(|cell| {
            let (u, i) = (cell / y.cols, cell % y.cols);
            let rate = T::dot(theta.row(THETA, u), theta.row(BETA, i));
            densities::poisson(y.get(u, i) as f64, rate).map_err(ModelError::from)
        })
        .collect()
}

/// θ_u positive-ordered with componentwise Gamma(a, b) prior,
/// β_i componentwise Gamma(c, d), y_ui ~ Poisson(θ_u·β_i).
#[derive(Clone, Debug)]
pub struct GammaPoissonNmf {
    blocks: Vec<BlockSpec>,
    pub users: usize,
    pub items: usize,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl GammaPoissonNmf {
    pub(crate) fn from_params(p: &mut Params<'_>) -> Result<Self, ModelError> {
        let users = p.dim("U", None)?;
        let items = p.dim("I", None)?;
        let k = p.dim("K", Some(10))?;
        Ok(GammaPoissonNmf {
            blocks: vec![
                BlockSpec::array("theta", users, TransformKind::PositiveOrdered { k }),
                BlockSpec::array("beta", items, TransformKind::LowerBound { lower: 0.0, dim: k }),
            ],
            users,
            items,
            k,
            a: p.positive("a", 1.0)?,
            b: p.positive("b", 1.0)?,
            c: p.positive("c", 1.0)?,
            d: p.positive("d", 1.0)?,
        })
    }
}

impl Model for GammaPoissonNmf {
    fn name(&self) -> &str {
        "gamma_poisson_nmf"
    }

    fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    fn check_data(&self, data: &Dataset) -> Result<(), ModelError> {
        counts(data, self.users, self.items).map(|_| ())
    }

    fn num_observations(&self, data: &Dataset) -> Option<usize> {
        counts(data, self.users, self.items).ok().map(|y| y.data.len())
    }

    fn log_prior<T: Real>(&self, _data: &Dataset, theta: &Constrained<T>) -> Result<T, ModelError> {
        let (a, b, c, d) = (T::from(self.a), T::from(self.b), T::from(self.c), T::from(self.d));
        let mut terms = Vec::with_capacity((self.users + self.items) * self.k);
        for &t in theta.block(THETA) {
            terms.push(densities::gamma(t, a, b)?);
        }
        for &v in theta.block(BETA) {
            terms.push(densities::gamma(v, c, d)?);
        }
        Ok(T::sum(&terms))
    }

    fn log_likelihood_terms<T: Real>(
        &self,
        data: &Dataset,
        theta: &Constrained<T>,
        obs: Observations<'_>,
    ) -> Result<Vec<T>, ModelError> {
        cell_terms(counts(data, self.users, self.items)?, theta, obs)
    }
}

/// θ_u ~ Dirichlet(α0·1), β_ik ~ Exponential(λ0), y_ui ~ Poisson(θ_u·β_i).
#[derive(Clone, Debug)]
pub struct DirichletExponentialNmf {
    blocks: Vec<BlockSpec>,
    pub users: usize,
    pub items: usize,
    pub k: usize,
    pub alpha0: f64,
    pub lambda0: f64,
}

impl DirichletExponentialNmf {
    pub(crate) fn from_params(p: &mut Params<'_>) -> Result<Self, ModelError> {
        let users = p.dim("U", None)?;
        let items = p.dim("I", None)?;
        let k = p.dim("K", Some(10))?;
        Ok(DirichletExponentialNmf {
            blocks: vec![
                BlockSpec::array("theta", users, TransformKind::Simplex { k }),
                BlockSpec::array("beta", items, TransformKind::LowerBound { lower: 0.0, dim: k }),
            ],
            users,
            items,
            k,
            alpha0: p.positive("alpha0", 1000.0)?,
            lambda0: p.positive("lambda0", 0.1)?,
        })
    }
}

impl Model for DirichletExponentialNmf {
    fn name(&self) -> &str {
        "dirichlet_exponential_nmf"
    }

    fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    fn check_data(&self, data: &Dataset) -> Result<(), ModelError> {
        counts(data, self.users, self.items).map(|_| ())
    }

    fn num_observations(&self, data: &Dataset) -> Option<usize> {
        counts(data, self.users, self.items).ok().map(|y| y.data.len())
    }

    fn log_prior<T: Real>(&self, _data: &Dataset, theta: &Constrained<T>) -> Result<T, ModelError> {
        let alpha = vec![T::from(self.alpha0); self.k];
        let rate = T::from(self.lambda0);
        let mut terms = Vec::with_capacity(self.users + self.items * self.k);
        for u in 0..self.users {
            terms.push(densities::dirichlet(theta.row(THETA, u), &alpha)?);
        }
        for &v in theta.block(BETA) {
            terms.push(densities::exponential(v, rate)?);
        }
        Ok(T::sum(&terms))
    }

    fn log_likelihood_terms<T: Real>(
        &self,
        data: &Dataset,
        theta: &Constrained<T>,
        obs: Observations<'_>,
    ) -> Result<Vec<T>, ModelError> {
        cell_terms(counts(data, self.users, self.items)?, theta, obs)
    }
}
