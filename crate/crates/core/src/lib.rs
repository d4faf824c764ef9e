//! Automatic differentiation variational inference.
//!
//! Latent variables with constrained support are mapped to the real
//! coordinate space by [`transforms`], a mean-field Gaussian is fitted there
//! by stochastic gradient ascent on the ELBO ([`advi`]), and the fit is
//! scored on held-out data ([`eval`]). Gradients of model log-joints come
//! from the scalar tape in [`autodiff`].

// Comparisons are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advi;
pub mod autodiff;
pub mod data;
pub mod densities;
pub mod error;
pub mod eval;
pub mod model;
pub mod output;
pub mod synth;
pub mod transforms;
pub mod zoo;

pub use advi::{
    draw_posterior, run_advi, AdviConfig, AdviFit, ElboTrace, InitMode, PosteriorDraws, RngStreams, TraceRow,
    VariationalParams,
};
pub use autodiff::{Graph, Real, Var};
pub use data::{load_dataset, Dataset, Entry, Matrix};
pub use error::{AdError, AdviError, DataError, DensityError, EvalFailure, ModelError, OutputError, TransformError};
pub use eval::{heldout_log_predictive, EvalReport};
pub use model::{log_joint_gradient, log_joint_unconstrained, minibatch_log_joint, Model, Observations};
pub use output::{write_outputs, OutputPaths, RunManifest};
pub use transforms::{BlockSpec, Constrained, Shape, TransformKind};
pub use zoo::{infer_dims, make_model, Dims, Hypers, ZooModel};
