//! Probabilistic prediction for multi-response regression: nonparametric
//! marginal models (regression forests with empirical residual margins, or
//! gamma GLMs) combined with a learned dependence model (a generative
//! moment matching network or a parametric copula), plus the evaluation
//! statistics used to compare such models.
//!
//! The numeric core is generic over the scalar type via [`scalar::Real`];
//! the `*64` aliases below pin the `f64` instantiations used by the CLI and
//! the serialized model format.

pub mod copulas;
pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod glm;
pub mod gmmn;
pub mod matrix;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix64 = matrix::Matrix<f64>;
pub type Dataset64 = data::Dataset<f64>;
pub type EmpiricalMargin64 = data::EmpiricalMargin<f64>;
pub type ForestModel64 = forest::ForestModel<f64>;
pub type GammaGlmModel64 = glm::GammaGlmModel<f64>;
pub type GeneratorNetwork64 = gmmn::GeneratorNetwork<f64>;
pub type KernelMixture64 = gmmn::KernelMixture<f64>;
pub type CopulaModel64 = copulas::CopulaModel<f64>;
pub type JointModel64 = pipeline::JointModel<f64>;
pub type PredictiveSample64 = pipeline::PredictiveSample<f64>;
pub type FitConfig64 = pipeline::FitConfig<f64>;
pub type EvalReport64 = eval::EvalReport<f64>;
pub type BenchmarkConfig64 = eval::BenchmarkConfig<f64>;
