//! Meta-analysis of twin-study heritability with a Bayesian nonparametric
//! random-effects regression model.
//!
//! The pipeline has three stages:
//!
//! 1. [`effect_size`] turns raw MZ/DZ twin correlations into heritability
//!    effect sizes with sampling variances and pools informant-specific
//!    estimates within a study.
//! 2. [`dataset`] loads, validates, and z-standardizes the meta-analytic
//!    dataset of effect sizes and 29 study-level moderators.
//! 3. [`model`] + [`mcmc`] define and sample an infinite mixture of normal
//!    densities whose mixture weights depend on the moderators through an
//!    ordered-probit regression; [`predictive`] turns a posterior chain into
//!    predictive densities, coefficient tables, conditional profiles, a
//!    publication-bias probe, and a predictive mean-square-error fit score.

pub mod dataset;
pub mod effect_size;
pub mod error;
pub mod mcmc;
pub mod model;
pub mod predictive;
pub mod stats;

pub use error::Error;

/// Crate version recorded in chain sidecars and run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
