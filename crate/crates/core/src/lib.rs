//! Regression with chaotic Tracemean feature augmentation.
//!
//! Each normalized input feature drives a skew-tent-map neuron; the mean of
//! the neuron's trajectory until it reaches the stimulus neighbourhood (the
//! Tracemean) is appended as an extra column. The augmented matrix is then
//! fed to ordinary least squares, ridge, lasso or epsilon-insensitive SVR.
//!
//! The numerical core (`linalg`, `chaos`, `models`, `eval`, `tuning`) is
//! generic over [`Scalar`]; the aliases below pin it to `f64`, which is what
//! the experiment pipeline and reports use.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chaos;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod tuning;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type ChaosParams = chaos::ChaosParams<f64>;
pub type Trace = chaos::Trace<f64>;
pub type Dataset = data::Dataset<f64>;
pub type NormStats = data::NormStats<f64>;
pub type ModelSpec = models::ModelSpec<f64>;
pub type FittedModel = models::FittedModel<f64>;
pub type Metrics = eval::Metrics<f64>;
pub type GridSpec = tuning::GridSpec<f64>;
pub type GridSearchResult = tuning::GridSearchResult<f64>;

pub type MatrixF32 = linalg::DenseMatrix<f32>;
pub type ChaosParamsF32 = chaos::ChaosParams<f32>;
