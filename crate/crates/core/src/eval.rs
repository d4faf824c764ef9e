//! Held-out scoring with the Monte Carlo posterior predictive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advi::PosteriorDraws;
use crate::data::Dataset;
use crate::error::ModelError;
use crate::model::{Model, Observations};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// (1/N) Σ_n log[(1/S) Σ_s p(x_n | θ_s)].
    pub mean_log_predictive: f64,
    pub n_heldout: usize,
    pub n_draws: usize,
    /// First held-out point that every draw gives zero likelihood, when the
    /// score is −∞.
    pub worst_index: Option<usize>,
}

/// Running log-sum-exp per held-out point.
#[derive(Clone)]
struct Accumulator {
    max: Vec<f64>,
    sum: Vec<f64>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Accumulator {
            max: vec![f64::NEG_INFINITY; n],
            sum: vec![0.0; n],
        }
    }

    fn push(&mut self, terms: &[f64]) {
        for ((m, s), &t) in self.max.iter_mut().zip(self.sum.iter_mut()).zip(terms) {
            add_log(m, s, t);
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for i in 0..self.max.len() {
            if other.max[i] == f64::NEG_INFINITY {
                continue;
            }
            add_log(&mut self.max[i], &mut self.sum[i], other.max[i] + other.sum[i].ln());
        }
    }
}

/// Fold log-value `t` into Σ exp(·) stored as `max + ln(sum)`.
fn add_log(max: &mut f64, sum: &mut f64, t: f64) {
    if t == f64::NEG_INFINITY {
        return;
    }
    if t <= *max {
        *sum += (t - *max).exp();
    } else {
        *sum = *sum * (*max - t).exp() + 1.0;
        *max = t;
    }
}

const CHUNK: usize = 64;

/// Average held-out log predictive density under the draws.
///
/// Draws are scored in fixed-size chunks in parallel and the chunks merged
/// in order, so the result does not depend on the thread count.
pub fn heldout_log_predictive<M: Model>(
    model: &M,
    draws: &PosteriorDraws,
    heldout: &Dataset,
) -> Result<EvalReport, ModelError> {
    if draws.is_empty() {
        return Err(ModelError::Config("no posterior draws to score".into()));
    }
    if draws.blocks.as_slice() != model.blocks() {
        return Err(ModelError::Config(
            "draws were taken under a different model layout".into(),
        ));
    }
    model.check_data(heldout)?;
    let n = model
        .num_observations(heldout)
        .ok_or_else(|| ModelError::Config(format!("model `{}` has no per-observation likelihood", model.name())))?;
    if n == 0 {
        return Err(ModelError::Config("held-out data has no observations".into()));
    }

    let chunks: Result<Vec<Accumulator>, ModelError> = (0..draws.len())
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Accumulator::new(n);
            for &s in chunk {
                let theta = draws.constrained(s)?;
                let terms = model.log_likelihood_terms::<f64>(heldout, &theta, Observations::All)?;
                acc.push(&terms);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accumulator::new(n);
    for c in &chunks? {
        total.merge(c);
    }

    let log_s = (draws.len() as f64).ln();
    let mut score = 0.0;
    let mut worst_index = None;
    for i in 0..n {
        let lme = total.max[i] + total.sum[i].ln() - log_s;
        if lme == f64::NEG_INFINITY && worst_index.is_none() {
            worst_index = Some(i);
        }
        score += lme;
    }
    Ok(EvalReport {
        mean_log_predictive: score / n as f64,
        n_heldout: n,
        n_draws: draws.len(),
        worst_index,
    })
}
