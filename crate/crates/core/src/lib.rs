//! Online-updating Cox proportional hazards fitting and diagnostics.
//!
//! Survival data arrive in blocks. Each block is fitted on its own, reduced
//! to a constant-size summary and folded into a running state, from which
//! two global tests of the proportional hazards assumption are available
//! at every step:
//!
//! * the cumulative statistic over all blocks seen so far, and
//! * the window statistic over the most recent `w` blocks.
//!
//! Running coefficient estimates (a cumulative weighted combination of the
//! block estimates, and a bias-corrected variant that also accumulates
//! scores) provide the points at which residuals are evaluated.
//!
//! The [`sim`] module carries the Monte-Carlo harness used to check size,
//! power and the χ² reference distribution.

pub mod error;
pub mod gt_test;
pub mod linalg;
pub mod online;
pub mod par;
pub mod residuals;
pub mod sim;
pub mod survival;

pub use error::{CoxError, Result};
pub use gt_test::{chisq_quantile, chisq_sf, full_test, HMode, TestResult, TestVersion};
pub use online::{BlockSummary, EvalPoint, OnlineState, StreamConfig};
pub use residuals::{km_left_continuous, schoenfeld_residuals, transform_and_center, ResidualSet, TransformKind};
pub use survival::{fit_cox, CoxFit, DataBlock, SolverOptions, SubjectRecord, Ties};
