//! Built-in models.
//!
//! | name | latent blocks |
//! |------|---------------|
//! | `std_normal` | θ ∈ R |
//! | `poisson_exponential` | λ > 0 |
//! | `linreg_ard` | w ∈ R^D, σ² > 0, α ∈ R₊^D |
//! | `hier_logistic` | five varying-intercept groups, β ∈ R⁵, five scales in (0, 100) |
//! | `gamma_poisson_nmf` | positive ordered θ_u ∈ R₊^K, β_i ∈ R₊^K |
//! | `dirichlet_exponential_nmf` | θ_u on the K-simplex, β_i ∈ R₊^K |
//! | `gmm`, `gmm_minibatch` | mixture weights on the simplex, means, scales |

use std::collections::BTreeMap;

use crate::autodiff::Real;
use crate::data::Dataset;
use crate::error::ModelError;
use crate::model::{Model, Observations};
use crate::transforms::{BlockSpec, Constrained};

mod gmm;
mod hier_logistic;
mod linreg_ard;
mod nmf;
mod simple;

pub use gmm::Gmm;
pub use hier_logistic::HierLogistic;
pub use linreg_ard::LinregArd;
pub use nmf::{DirichletExponentialNmf, GammaPoissonNmf};
pub use simple::{PoissonExponential, StdNormal};

pub type Hypers = BTreeMap<String, f64>;
pub type Dims = BTreeMap<String, usize>;

pub const ZOO: &[&str] = &[
    "std_normal",
    "poisson_exponential",
    "linreg_ard",
    "hier_logistic",
    "gamma_poisson_nmf",
    "dirichlet_exponential_nmf",
    "gmm",
    "gmm_minibatch",
];

/// Dimension names each model needs, with defaults where one exists.
pub fn required_dims(name: &str) -> Result<&'static [(&'static str, Option<usize>)], ModelError> {
    Ok(match name {
        "std_normal" | "poisson_exponential" => &[],
        "linreg_ard" => &[("D", None)],
        "hier_logistic" => &[
            ("n_age", None),
            ("n_edu", None),
            ("n_age_edu", None),
            ("n_state", None),
            ("n_region_full", None),
        ],
        "gamma_poisson_nmf" | "dirichlet_exponential_nmf" => &[("U", None), ("I", None), ("K", Some(10))],
        "gmm" | "gmm_minibatch" => &[("K", None), ("D", None)],
        other => return Err(ModelError::UnknownModel(other.to_owned())),
    })
}

/// Resolve a model's dimensions: explicit values first, then integer
/// entries of the dataset, then shapes of the data arrays, then defaults.
pub fn infer_dims(name: &str, data: &Dataset, explicit: &Dims) -> Result<Dims, ModelError> {
    let mut dims = Dims::new();
    for &(dim, default) in required_dims(name)? {
        let from_shape = || -> Option<usize> {
            match (name, dim) {
                ("linreg_ard", "D") => data.real_matrix("x").ok().map(|m| m.cols),
                ("gmm" | "gmm_minibatch", "D") => data.real_matrix("y").ok().map(|m| m.cols),
                (_, "U") => data.int_matrix("y").ok().map(|m| m.rows),
                (_, "I") => data.int_matrix("y").ok().map(|m| m.cols),
                _ => None,
            }
        };
        let value = explicit
            .get(dim)
            .copied()
            .or_else(|| data.size(dim).ok())
            .or_else(from_shape)
            .or(default);
        if let Some(v) = value {
            dims.insert(dim.to_owned(), v);
        }
    }
    Ok(dims)
}

pub(crate) struct Params<'a> {
    model: &'a str,
    hypers: &'a Hypers,
    dims: &'a Dims,
    known: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(model: &'a str, hypers: &'a Hypers, dims: &'a Dims) -> Self {
        Params {
            model,
            hypers,
            dims,
            known: Vec::new(),
        }
    }

    pub(crate) fn hyper(&mut self, name: &'static str, default: f64) -> Result<f64, ModelError> {
        self.known.push(name);
        let v = self.hypers.get(name).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(ModelError::Config(format!("hyperparameter {name} = {v} is not finite")));
        }
        Ok(v)
    }

    pub(crate) fn positive(&mut self, name: &'static str, default: f64) -> Result<f64, ModelError> {
        let v = self.hyper(name, default)?;
        if v <= 0.0 {
            return Err(ModelError::Config(format!(
                "hyperparameter {name} = {v} must be positive"
            )));
        }
        Ok(v)
    }

    pub(crate) fn dim(&mut self, name: &'static str, default: Option<usize>) -> Result<usize, ModelError> {
        let v = self
            .dims
            .get(name)
            .copied()
            .or(default)
            .ok_or_else(|| ModelError::MissingDim {
                model: self.model.to_owned(),
                dim: name.to_owned(),
            })?;
        if v == 0 {
            return Err(ModelError::Config(format!("dimension {name} must be positive")));
        }
        Ok(v)
    }

    fn finish(self) -> Result<(), ModelError> {
        if let Some(unknown) = self.hypers.keys().find(|k| !self.known.contains(&k.as_str())) {
            return Err(ModelError::Config(format!(
                "model `{}` has no hyperparameter `{unknown}`",
                self.model
            )));
        }
        Ok(())
    }
}

/// Any built-in model.
#[derive(Clone, Debug)]
pub enum ZooModel {
    StdNormal(StdNormal),
    PoissonExponential(PoissonExponential),
    LinregArd(LinregArd),
    HierLogistic(HierLogistic),
    GammaPoissonNmf(GammaPoissonNmf),
    DirichletExponentialNmf(DirichletExponentialNmf),
    Gmm(Gmm),
}

/// Build a zoo model by name.
pub fn make_model(name: &str, hypers: &Hypers, dims: &Dims) -> Result<ZooModel, ModelError> {
    required_dims(name)?;
    let mut p = Params::new(name, hypers, dims);
    let model = match name {
        "std_normal" => ZooModel::StdNormal(StdNormal::from_params(&mut p)?),
        "poisson_exponential" => ZooModel::PoissonExponential(PoissonExponential::from_params(&mut p)?),
        "linreg_ard" => ZooModel::LinregArd(LinregArd::from_params(&mut p)?),
        "hier_logistic" => ZooModel::HierLogistic(HierLogistic::from_params(&mut p)?),
        "gamma_poisson_nmf" => ZooModel::GammaPoissonNmf(GammaPoissonNmf::from_params(&mut p)?),
        "dirichlet_exponential_nmf" => ZooModel::DirichletExponentialNmf(DirichletExponentialNmf::from_params(&mut p)?),
        "gmm" => ZooModel::Gmm(Gmm::from_params(&mut p, false)?),
        "gmm_minibatch" => ZooModel::Gmm(Gmm::from_params(&mut p, true)?),
        other => return Err(ModelError::UnknownModel(other.to_owned())),
    };
    p.finish()?;
    for block in model.blocks() {
        block.validate()?;
    }
    Ok(model)
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $body:expr) => {
        match $self {
            ZooModel::StdNormal($m) => $body,
            ZooModel::PoissonExponential($m) => $body,
            ZooModel::LinregArd($m) => $body,
            ZooModel::HierLogistic($m) => $body,
            ZooModel::GammaPoissonNmf($m) => $body,
            ZooModel::DirichletExponentialNmf($m) => $body,
            ZooModel::Gmm($m) => $body,
        }
    };
}

impl Model for ZooModel {
    fn name(&self) -> &str {
        dispatch!(self, m => m.name())
    }
    fn blocks(&self) -> &[BlockSpec] {
        dispatch!(self, m => m.blocks())
    }
    fn check_data(&self, data: &Dataset) -> Result<(), ModelError> {
        dispatch!(self, m => m.check_data(data))
    }
    fn num_observations(&self, data: &Dataset) -> Option<usize> {
        dispatch!(self, m => m.num_observations(data))
    }
    fn default_batch_size(&self) -> Option<usize> {
        dispatch!(self, m => m.default_batch_size())
    }
    fn log_prior<T: Real>(&self, data: &Dataset, theta: &Constrained<T>) -> Result<T, ModelError> {
        dispatch!(self, m => m.log_prior(data, theta))
    }
    fn log_likelihood_terms<T: Real>(
        &self,
        data: &Dataset,
        theta: &Constrained<T>,
        obs: Observations<'_>,
    ) -> Result<Vec<T>, ModelError> {
        dispatch!(self, m => m.log_likelihood_terms(data, theta, obs))
    }
}

/// Error for a data entry whose length disagrees with the model.
pub(crate) fn shape_error(name: &str, detail: String) -> ModelError {
    ModelError::Data(crate::error::DataError::Shape {
        name: name.to_owned(),
        detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::log_joint_unconstrained;
    use crate::transforms::{Shape, TransformKind};

    #[test]
    fn unknown_model_and_missing_dims() {
        assert!(matches!(
            make_model("nosuch", &Hypers::new(), &Dims::new()),
            Err(ModelError::UnknownModel(_))
        ));
        assert!(matches!(
            make_model("gmm", &Hypers::new(), &Dims::new()),
            Err(ModelError::MissingDim { .. })
        ));
        let mut h = Hypers::new();
        h.insert("bogus".into(), 1.0);
        assert!(matches!(
            make_model("poisson_exponential", &h, &Dims::new()),
            Err(ModelError::Config(_))
        ));
    }

    #[test]
    fn poisson_exponential_layout() {
        let m = make_model("poisson_exponential", &Hypers::new(), &Dims::new()).unwrap();
        assert_eq!(m.dim(), 1);
        assert_eq!(m.blocks().len(), 1);
        assert_eq!(m.blocks()[0].kind, TransformKind::LowerBound { lower: 0.0, dim: 1 });
        assert_eq!(m.blocks()[0].shape, Shape::Scalar);
    }

    #[test]
    fn nmf_defaults() {
        let dims: Dims = [("U".to_string(), 3), ("I".to_string(), 4)].into();
        let m = make_model("dirichlet_exponential_nmf", &Hypers::new(), &dims).unwrap();
        match &m {
            ZooModel::DirichletExponentialNmf(inner) => {
                assert_eq!(inner.k, 10);
                assert_eq!(inner.alpha0, 1000.0);
                assert_eq!(inner.lambda0, 0.1);
            }
            other => panic!("unexpected {other:?}"),
        }
        // Simplex(10) per user: 9 free values each; 10 positive values per item.
        assert_eq!(m.dim(), 3 * 9 + 4 * 10);
    }

    #[test]
    fn gmm_figure_configuration() {
        let dims: Dims = [("K".to_string(), 10), ("D".to_string(), 4)].into();
        let m = make_model("gmm", &Hypers::new(), &dims).unwrap();
        assert_eq!(m.blocks()[0].kind, TransformKind::Simplex { k: 10 });
        assert_eq!(m.dim(), 9 + 10 * 4 + 10 * 4);
        let mb = make_model("gmm_minibatch", &Hypers::new(), &dims).unwrap();
        assert_eq!(mb.default_batch_size(), Some(500));
    }

    #[test]
    fn toy_examples() {
        let pe = make_model("poisson_exponential", &Hypers::new(), &Dims::new()).unwrap();
        let empty = Dataset::new();
        let v = log_joint_unconstrained(&pe, &empty, &[0.0]).unwrap();
        assert!((v + 1.0).abs() < 1e-15);

        let data = Dataset::from_json_str(r#"{"x":[2]}"#).unwrap();
        let v = log_joint_unconstrained(&pe, &data, &[0.0]).unwrap();
        assert!((v + 2.693_147_2).abs() < 1e-7);

        let sn = make_model("std_normal", &Hypers::new(), &Dims::new()).unwrap();
        let v = log_joint_unconstrained(&sn, &empty, &[0.0]).unwrap();
        assert!((v + 0.918_938_5).abs() < 1e-7);
    }

    #[test]
    fn dims_from_data() {
        let data = Dataset::from_json_str(r#"{"K":3,"y":[[1.0,2.0],[0.0,1.0]]}"#).unwrap();
        let dims = infer_dims("gmm", &data, &Dims::new()).unwrap();
        assert_eq!(dims["K"], 3);
        assert_eq!(dims["D"], 2);
        let over: Dims = [("K".to_string(), 5)].into();
        assert_eq!(infer_dims("gmm", &data, &over).unwrap()["K"], 5);
    }
}
