use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::TransformError;
use crate::model::Model;
use crate::transforms::{unpack, BlockSpec, Constrained};

use super::estimate::inverse_standardize;
use super::rng::{Purpose, RngStreams};
use super::VariationalParams;

const SAMPLE_MASK: u64 = (1 << 20) - 1;

/// Posterior draws in the constrained space, one row per draw, columns in
/// block order.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    pub blocks: Vec<BlockSpec>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PosteriorDraws {
    pub fn new(blocks: Vec<BlockSpec>, rows: Vec<Vec<f64>>) -> Self {
        let columns = blocks.iter().flat_map(BlockSpec::column_names).collect();
        PosteriorDraws { blocks, columns, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Draw `s` split back into blocks.
    pub fn constrained(&self, s: usize) -> Result<Constrained<f64>, TransformError> {
        let row = &self.rows[s];
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for spec in &self.blocks {
            let n = spec.constrained_dim();
            let end = (offset + n).min(row.len());
            blocks.push(row[offset..end].to_vec());
            offset = end;
        }
        Constrained::from_blocks(&self.blocks, blocks)
    }

    /// Column means.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.columns.len()];
        for row in &self.rows {
            for (a, v) in m.iter_mut().zip(row) {
                *a += v;
            }
        }
        let s = self.rows.len() as f64;
        m.iter_mut().for_each(|a| *a /= s);
        m
    }
}

/// Draw ζ ~ N(μ, diag(exp(2ω))) `s` times and map each through T⁻¹.
///
/// Draw j uses its own substream, so the result does not depend on thread
/// scheduling.
pub fn draw_posterior<M: Model>(
    model: &M,
    params: &VariationalParams,
    s: usize,
    streams: &RngStreams,
) -> Result<PosteriorDraws, TransformError> {
    if params.dim() != model.dim() {
        return Err(TransformError::Shape {
            expected: model.dim(),
            got: params.dim(),
        });
    }
    let rows: Result<Vec<Vec<f64>>, TransformError> = (0..s as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = streams.stream(Purpose::Posterior, j >> 20, j & SAMPLE_MASK);
            let eta: Vec<f64> = (0..params.dim()).map(|_| rng.sample(StandardNormal)).collect();
            let zeta = inverse_standardize(params, &eta).expect("dimension checked");
            let (theta, _) = unpack(model.blocks(), &zeta[..])?;
            Ok(theta.flatten())
        })
        .collect();
    Ok(PosteriorDraws::new(model.blocks().to_vec(), rows?))
}
