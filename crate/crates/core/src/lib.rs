//! Double/debiased lasso inference for a treatment coefficient in high-dimensional
//! logistic and linear models.
//!
//! * [`numerics`]: logistic link, negative log-likelihood, weighted least squares.
//! * [`model_matrix`]: delimited-table ingestion and declarative encoding of survey-style
//!   data into a design matrix with dummies, baselines and interactions.
//! * [`lasso`]: coordinate-descent lasso for weighted least squares and logistic loss,
//!   plug-in and cross-validated penalties, post-lasso refits.
//! * [`dml`]: the debiased estimators and the multi-treatment driver.
//! * [`mc`]: synthetic designs with known truth and Monte Carlo coverage studies.
//!
//! Estimation code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`.
//!
//! ```
//! use doublelasso::dml::{dml_linear, DmlConfig, Family};
//! use doublelasso::mc::{gen_dgp, DgpSpec};
//!
//! let (data, truth) = gen_dgp::<f64>(&DgpSpec::sparse(Family::Linear, 300, 40, 3, 0.5), 7).unwrap();
//! let config = DmlConfig { family: Family::Linear, ..DmlConfig::default() };
//! let est = dml_linear(&data, 0, &config).unwrap();
//! assert!((est.alpha_check - truth.alpha0).abs() < 0.3);
//! ```

// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dml;
pub mod error;
pub mod lasso;
mod linalg;
pub mod mc;
pub mod model_matrix;
pub mod numerics;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset64 = model_matrix::Dataset<f64>;
pub type LassoFit64 = lasso::LassoFit<f64>;
pub type Penalty64 = lasso::Penalty<f64>;
pub type Refit64 = lasso::Refit<f64>;
pub type NuisanceArtifacts64 = dml::NuisanceArtifacts<f64>;
pub type CoefficientVector64 = numerics::CoefficientVector<f64>;
pub type Observation64 = numerics::Observation<f64>;
