//! Partial likelihood machinery for right-censored data with time-fixed
//! covariates.

mod data;
mod fit;
mod riskset;

pub use data::{DataBlock, SubjectRecord};
pub use fit::{fit_cox, CoxFit, SolverOptions};
pub use riskset::{
    information, log_partial_likelihood, score, weighted_mean_covariates, weighted_variance, Ties,
};

pub(crate) use riskset::{sweep, Detail};
