//! Attribute privacy for tabular data.
//!
//! Releases noisy answers to statistical queries while protecting secrets
//! about whole columns: either a function of a column in the released
//! dataset (dataset-level), or a parameter of the distribution that
//! generated the column (distributional). Four release mechanisms are
//! provided:
//!
//! - [`gaussian::apgm`]: Gaussian noise calibrated to the conditional
//!   distribution of the query given each secret, for multivariate Gaussian
//!   data with linear queries.
//! - [`approx::apgmng`]: the same calibration driven by analyst-supplied
//!   Gaussian approximations of non-Gaussian conditionals.
//! - [`quilt::apmqm`]: Laplace noise scaled by Markov-quilt sensitivity over a
//!   Bayesian network of distribution parameters.
//! - [`wasserstein::wasserstein_mechanism`]: Laplace noise scaled by the
//!   worst-case ∞-Wasserstein distance between conditional output
//!   distributions.
//!
//! [`quilt::baseline_mqm`] implements the classic value-level Markov Quilt
//! Mechanism for comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod bayesnet;
pub mod config;
pub mod dataset;
pub mod distribution;
pub mod domain;
pub mod error;
pub mod framework;
pub mod gaussian;
pub mod noise;
pub mod query;
pub mod quilt;
pub mod wasserstein;

pub use dataset::Dataset;
pub use distribution::DiscreteDistribution;
pub use domain::{AttributeDomain, Value};
pub use error::{Error, Result};
pub use framework::{DistributionClass, PrivacyParams, PufferfishFramework, SecretSpec};
pub use noise::NoiseRng;
pub use query::QuerySpec;
