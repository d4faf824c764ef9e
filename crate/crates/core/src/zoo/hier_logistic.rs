use std::borrow::Cow;

use crate::autodiff::Real;
use crate::data::Dataset;
use crate::densities;
use crate::error::ModelError;
use crate::model::{indices, Model, Observations};
use crate::transforms::{BlockSpec, Constrained, TransformKind};

use super::{shape_error, Params};

/// Varying-intercept groups in block order, with the data index array and
/// the dimension that sizes each.
const GROUPS: [(&str, &str, &str); 5] = [
    ("a", "age", "n_age"),
    ("b", "edu", "n_edu"),
    ("c", "age_edu", "n_age_edu"),
    ("d", "state", "n_state"),
    ("e", "region_full", "n_region_full"),
];
const BETA: usize = 5;
const FIRST_SCALE: usize = 6;
const SCALE_UPPER: f64 = 100.0;

/// Hierarchical logistic regression for binary survey responses.
///
/// ```text
/// y_hat_n = β1 + β2·black_n + β3·female_n + β4·v_prev_full_n + β5·female_n·black_n
///         + a[age_n] + b[edu_n] + c[age_edu_n] + d[state_n] + e[region_full_n]
/// y_n ~ bernoulli_logit(y_hat_n)
/// a ~ N(0, σ_a), …, e ~ N(0, σ_e);  β ~ N(0, beta_scale);  σ_· ~ U(0, 100)
/// ```
///
/// Group index arrays in the data are 1-based.
#[derive(Clone, Debug)]
pub struct HierLogistic {
    blocks: Vec<BlockSpec>,
    pub sizes: [usize; 5],
    pub beta_scale: f64,
}

struct Columns<'d> {
    groups: [&'d [i64]; 5],
    black: Cow<'d, [f64]>,
    female: Cow<'d, [f64]>,
    v_prev: Cow<'d, [f64]>,
    y: &'d [i64],
}

impl HierLogistic {
    pub(crate) fn from_params(p: &mut Params<'_>) -> Result<Self, ModelError> {
        let mut sizes = [0; 5];
        for (slot, (_, _, dim)) in sizes.iter_mut().zip(GROUPS) {
            *slot = p.dim(dim, None)?;
        }
        let mut blocks: Vec<BlockSpec> = GROUPS
            .iter()
            .zip(sizes)
            .map(|(&(name, _, _), n)| BlockSpec::vector(name, TransformKind::Identity { dim: n }))
            .collect();
        blocks.push(BlockSpec::vector("beta", TransformKind::Identity { dim: 5 }));
        for (name, _, _) in GROUPS {
            let scale_name = format!("sigma_{name}");
            blocks.push(BlockSpec::scalar(
                &scale_name,
                TransformKind::Interval {
                    lower: 0.0,
                    upper: SCALE_UPPER,
                    dim: 1,
                },
            ));
        }
        Ok(HierLogistic {
            blocks,
            sizes,
            beta_scale: p.positive("beta_scale", 100.0)?,
        })
    }

    fn columns<'d>(&self, data: &'d Dataset) -> Result<Columns<'d>, ModelError> {
        let y = data.int_vec("y")?;
        let n = y.len();
        if let Some(bad) = y.iter().find(|&&v| v != 0 && v != 1) {
            return Err(shape_error("y", format!("outcome {bad} is not 0 or 1")));
        }
        let mut groups: [&[i64]; 5] = [&[]; 5];
        for (slot, ((_, col, _), size)) in groups.iter_mut().zip(GROUPS.iter().zip(self.sizes)) {
            let ix = data.int_vec(col)?;
            if ix.len() != n {
                return Err(shape_error(col, format!("has {} entries, y has {n}", ix.len())));
            }
            if let Some(bad) = ix.iter().find(|&&v| v < 1 || v as usize > size) {
                return Err(shape_error(col, format!("index {bad} outside 1..={size}")));
            }
            *slot = ix;
        }
        let real = |name: &str| -> Result<Cow<'d, [f64]>, ModelError> {
            let v = data.real_vec(name)?;
            if v.len() != n {
                return Err(shape_error(name, format!("has {} entries, y has {n}", v.len())));
            }
            Ok(v)
        };
        Ok(Columns {
            groups,
            black: real("black")?,
            female: real("female")?,
            v_prev: real("v_prev_full")?,
            y,
        })
    }
}

impl Model for HierLogistic {
    fn name(&self) -> &str {
        "hier_logistic"
    }

    fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    fn check_data(&self, data: &Dataset) -> Result<(), ModelError> {
        self.columns(data).map(|_| ())
    }

    fn num_observations(&self, data: &Dataset) -> Option<usize> {
        self.columns(data).ok().map(|c| c.y.len())
    }

    fn log_prior<T: Real>(&self, _data: &Dataset, theta: &Constrained<T>) -> Result<T, ModelError> {
        let mut terms = Vec::new();
        let zero = T::from(0.0);
        for g in 0..GROUPS.len() {
            let scale = theta.scalar(FIRST_SCALE + g);
            terms.push(densities::uniform(scale, 0.0, SCALE_UPPER)?);
            for &effect in theta.block(g) {
                terms.push(densities::normal(effect, zero, scale)?);
            }
        }
        let beta_scale = T::from(self.beta_scale);
        for &b in theta.block(BETA) {
            terms.push(densities::normal(b, zero, beta_scale)?);
        }
        Ok(T::sum(&terms))
    }

    fn log_likelihood_terms<T: Real>(
        &self,
        data: &Dataset,
        theta: &Constrained<T>,
        obs: Observations<'_>,
    ) -> Result<Vec<T>, ModelError> {
        let cols = self.columns(data)?;
        let beta = theta.block(BETA);
        let mut operands = Vec::with_capacity(10);
        let mut coeffs = Vec::with_capacity(10);
        indices(obs, cols.y.len())
            .map(|n| {
                operands.clear();
                coeffs.clear();
                let (black, female) = (cols.black[n], cols.female[n]);
                operands.extend_from_slice(beta);
                coeffs.extend_from_slice(&[1.0, black, female, cols.v_prev[n], female * black]);
                for (g, ix) in cols.groups.iter().enumerate() {
                    operands.push(theta.block(g)[(ix[n] - 1) as usize]);
                    coeffs.push(1.0);
                }
                let logit = T::weighted_sum(&coeffs, &operands);
                densities::bernoulli_logit(cols.y[n] as f64, logit).map_err(ModelError::from)
            })
            .collect()
    }
}
