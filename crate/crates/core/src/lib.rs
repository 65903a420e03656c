//! Bayesian small-area estimation for ordinal survey responses.
//!
//! Responses follow a cumulative-logit model whose cut points may vary by
//! demographic group, with additive covariate effects and a Leroux
//! conditional-autoregressive area effect. Posterior draws come from an
//! adaptive Metropolis-within-Gibbs sampler and are post-stratified to
//! area-level category shares.

pub mod commands;
pub mod constraints;
pub mod cutpoints;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod io;
pub mod mcmc;
pub mod model;
pub mod poststrat;
pub mod synth;

pub use error::{Error, Result};
pub use graph::{LcarHyper, SpatialGraph};
pub use mcmc::{Fit, McmcConfig, MonitorConfig, PosteriorDraws};
pub use model::{AlphaConstraint, Factor, ModelSpec, ParameterState, Respondent, SurveyDataset};
pub use poststrat::PopulationTable;
