use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::DataBlock;
use super::riskset::{sweep, Detail, Sweep, Ties};
use crate::error::{CoxError, Result};
use crate::linalg::{spd_solve, sup_norm};

/// Newton-Raphson settings for the partial likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub ties: Ties,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Converged once `‖U‖∞` drops below this.
    pub score_tolerance: f64,
    /// A log-likelihood change below this also counts as convergence,
    /// provided `‖U‖∞ <= accept_score_tolerance`.
    pub loglik_tolerance: f64,
    pub accept_score_tolerance: f64,
    /// `‖β‖∞` beyond which the likelihood is treated as monotone. A fit
    /// whose information at the optimum has collapsed relative to the
    /// starting point is reported the same way.
    pub separation_bound: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            ties: Ties::Efron,
            max_iterations: 25,
            max_halvings: 5,
            score_tolerance: 1e-9,
            loglik_tolerance: 1e-10,
            accept_score_tolerance: 1e-8,
            separation_bound: 50.0,
        }
    }
}

/// Maximum partial likelihood fit of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub beta_hat: DVector<f64>,
    pub information: DMatrix<f64>,
    pub score: DVector<f64>,
    pub score_norm: f64,
    pub log_pl: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ties: Ties,
}

/// Fits the Cox model on `block` by Newton-Raphson with step halving.
///
/// Reaching the iteration cap is not an error: the returned fit carries
/// `converged = false` and the caller decides.
pub fn fit_cox(block: &DataBlock, init: &[f64], opts: &SolverOptions) -> Result<CoxFit> {
    let ties = opts.ties;
    let mut beta = DVector::from_column_slice(init);
    let mut current = sweep(block, beta.as_slice(), ties, Detail::Totals)?;
    let mut iterations = 0;
    let initial_scale = max_eigenvalue(&current.information);
    let mut converged = sup_norm(&current.score) < opts.score_tolerance;

    while !converged && iterations < opts.max_iterations {
        let step = spd_solve(&current.information, &current.score, "Newton step")?;
        iterations += 1;

        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut trial = sweep(block, candidate.as_slice(), ties, Detail::Totals)?;
        let slack = 1e-12 * (1.0 + current.log_pl.abs());
        let mut halvings = 0;
        while !(trial.log_pl.is_finite() && trial.log_pl >= current.log_pl - slack)
            && halvings < opts.max_halvings
        {
            scale *= 0.5;
            halvings += 1;
            candidate = &beta + &step * scale;
            trial = sweep(block, candidate.as_slice(), ties, Detail::Totals)?;
        }
        if !(trial.log_pl.is_finite() && trial.log_pl >= current.log_pl - slack) {
            // no ascent along the Newton direction: accept the current
            // point only if it is already at the optimum
            converged = sup_norm(&current.score) <= opts.accept_score_tolerance;
            break;
        }

        let change = (trial.log_pl - current.log_pl).abs();
        beta = candidate;
        current = trial;
        if sup_norm(&beta) > opts.separation_bound {
            return Err(CoxError::Separation { bound: opts.separation_bound, iterations });
        }
        let norm = sup_norm(&current.score);
        converged = norm < opts.score_tolerance
            || (change < opts.loglik_tolerance && norm <= opts.accept_score_tolerance);
    }

    // A likelihood that keeps rising towards an asymptote flattens the
    // score long before |β| reaches the bound; the information collapses
    // with it.
    if converged && min_eigenvalue(&current.information) <= SEPARATION_INFO_RATIO * initial_scale {
        return Err(CoxError::Separation { bound: opts.separation_bound, iterations });
    }

    Ok(finish(beta, current, iterations, converged, ties))
}

const SEPARATION_INFO_RATIO: f64 = 1e-8;

fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().cloned().fold(0.0, f64::max)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

fn finish(beta: DVector<f64>, ev: Sweep, iterations: usize, converged: bool, ties: Ties) -> CoxFit {
    CoxFit {
        beta_hat: beta,
        score_norm: sup_norm(&ev.score),
        information: ev.information,
        score: ev.score,
        log_pl: ev.log_pl,
        iterations,
        converged,
        ties,
    }
}
