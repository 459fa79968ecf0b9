use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::serde_mat;
use super::summary::{block_summary, BlockSummary};
use crate::error::{CoxError, Result};
use crate::gt_test::{assemble, TestResult, TestVersion};
use crate::linalg::{spd_inverse, spd_solve};
use crate::residuals::TransformKind;
use crate::survival::{fit_cox, sweep, CoxFit, DataBlock, Detail, SolverOptions, Ties};

/// Where residuals and information are evaluated for a statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalPoint {
    /// Score-corrected cumulative estimator β̃_k.
    Cuee,
    /// Information-weighted cumulative estimator β̂_k.
    Cee,
    /// The current block's own MLE.
    BlockMle,
    Fixed(Vec<f64>),
}

/// Settings that stay fixed over the life of a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub transform: TransformKind,
    pub ties: Ties,
    pub window: usize,
    pub cumulative_eval: EvalPoint,
    pub window_eval: EvalPoint,
    pub solver: SolverOptions,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            transform: TransformKind::KaplanMeier,
            ties: Ties::Efron,
            window: 5,
            cumulative_eval: EvalPoint::Cuee,
            window_eval: EvalPoint::Cee,
            solver: SolverOptions::default(),
        }
    }
}

impl StreamConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.window == 0 {
            return Err(CoxError::InvalidInput("window width must be at least 1".into()));
        }
        if self.solver.ties != self.ties {
            return Err(CoxError::InvalidInput("solver ties method differs from stream ties method".into()));
        }
        for point in [&self.cumulative_eval, &self.window_eval] {
            if let EvalPoint::Fixed(beta) = point {
                if beta.len() != p {
                    return Err(CoxError::DimensionMismatch { expected: p, found: beta.len() });
                }
            }
        }
        Ok(())
    }
}

/// Constant-size state carried from block to block.
///
/// Nothing in here grows with the number of subjects: the running sums are
/// p×p or p-vectors and the window holds at most `w` summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineState {
    pub p: usize,
    pub w: usize,
    pub k: usize,
    #[serde(with = "serde_mat::matrix")]
    pub h_cum: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub q_cum: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub cee_info: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub cee_beta: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub cuee_info: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub cuee_s: DVector<f64>,
    #[serde(with = "serde_mat::vector")]
    pub cuee_xi: DVector<f64>,
    #[serde(with = "serde_mat::vector")]
    pub cuee_beta: DVector<f64>,
    pub window: VecDeque<BlockSummary>,
}

/// Estimate with its variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub beta: DVector<f64>,
    pub variance: DMatrix<f64>,
}

impl Estimate {
    pub fn standard_errors(&self) -> DVector<f64> {
        self.variance.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// Everything produced by one call to [`OnlineState::process_block`].
#[derive(Debug, Clone)]
pub struct BlockOutcome {
    pub k: usize,
    pub n_k: usize,
    pub d_k: usize,
    pub fit: CoxFit,
    pub cee: Estimate,
    pub beta_check: DVector<f64>,
    pub cuee: Estimate,
    pub cumulative: TestResult,
    pub window: TestResult,
    /// Evaluation points actually used for the two summaries.
    pub cumulative_eval: DVector<f64>,
    pub window_eval: DVector<f64>,
    /// Summaries folded into the cumulative sums and the window ring.
    pub cumulative_summary: BlockSummary,
    pub window_summary: BlockSummary,
}

impl OnlineState {
    pub fn new(p: usize, w: usize) -> Result<Self> {
        if p == 0 {
            return Err(CoxError::InvalidInput("dimension must be at least 1".into()));
        }
        if w == 0 {
            return Err(CoxError::InvalidInput("window width must be at least 1".into()));
        }
        Ok(Self {
            p,
            w,
            k: 0,
            h_cum: DMatrix::zeros(p, p),
            q_cum: DVector::zeros(p),
            cee_info: DMatrix::zeros(p, p),
            cee_beta: DVector::zeros(p),
            cuee_info: DMatrix::zeros(p, p),
            cuee_s: DVector::zeros(p),
            cuee_xi: DVector::zeros(p),
            cuee_beta: DVector::zeros(p),
            window: VecDeque::with_capacity(w),
        })
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.p {
            return Err(CoxError::DimensionMismatch { expected: self.p, found });
        }
        Ok(())
    }

    /// Adds a summary to the running (H, Q) and returns the cumulative statistic.
    pub fn update_cumulative(&mut self, summary: &BlockSummary) -> Result<TestResult> {
        self.check_dim(summary.q_blk.len())?;
        let h = &self.h_cum + &summary.h_blk;
        let q = &self.q_cum + &summary.q_blk;
        let result = assemble(&q, &h, TestVersion::Cumulative, self.k + 1)?;
        self.h_cum = h;
        self.q_cum = q;
        self.k += 1;
        Ok(result)
    }

    /// Appends a summary to the window ring, evicting the oldest beyond `w`.
    pub fn push_window(&mut self, summary: BlockSummary) -> Result<()> {
        self.check_dim(summary.q_blk.len())?;
        if self.window.len() == self.w {
            self.window.pop_front();
        }
        self.window.push_back(summary);
        Ok(())
    }

    /// Statistic over the most recent `w` stored summaries (all of them when
    /// fewer are available, flagged as partial).
    pub fn window_test(&self, w: usize) -> Result<TestResult> {
        if w == 0 {
            return Err(CoxError::InvalidInput("window width must be at least 1".into()));
        }
        let last = self
            .window
            .back()
            .ok_or_else(|| CoxError::InvalidInput("window is empty".into()))?;
        let take = w.min(self.window.len());
        let mut h = DMatrix::zeros(self.p, self.p);
        let mut q = DVector::zeros(self.p);
        for s in self.window.iter().skip(self.window.len() - take) {
            h += &s.h_blk;
            q += &s.q_blk;
        }
        let version = TestVersion::Window { width: w, partial: take < w };
        assemble(&q, &h, version, last.k)
    }

    /// Folds a block fit into the information-weighted cumulative estimator.
    pub fn cee_update(&mut self, fit: &CoxFit) -> Result<Estimate> {
        self.check_dim(fit.beta_hat.len())?;
        if !fit.converged {
            return Err(CoxError::NotConverged { iterations: fit.iterations, score_norm: fit.score_norm });
        }
        let info = &self.cee_info + &fit.information;
        let rhs = &self.cee_info * &self.cee_beta + &fit.information * &fit.beta_hat;
        let beta = spd_solve(&info, &rhs, "cumulative information")?;
        let variance = spd_inverse(&info, "cumulative information")?;
        self.cee_info = info;
        self.cee_beta = beta.clone();
        Ok(Estimate { beta, variance })
    }

    /// Intermediary estimator combining past intermediaries with the current
    /// block MLE. Reads the state, does not change it.
    pub fn cuee_intermediary(&self, fit: &CoxFit) -> Result<DVector<f64>> {
        self.check_dim(fit.beta_hat.len())?;
        if !fit.converged {
            return Err(CoxError::NotConverged { iterations: fit.iterations, score_norm: fit.score_norm });
        }
        let info = &self.cuee_info + &fit.information;
        let rhs = &self.cuee_s + &fit.information * &fit.beta_hat;
        spd_solve(&info, &rhs, "intermediary information")
    }

    /// Evaluates information and score of `block` at the intermediary
    /// `beta_check` and updates the score-corrected estimator.
    pub fn cuee_update(&mut self, block: &DataBlock, beta_check: &DVector<f64>, ties: Ties) -> Result<Estimate> {
        self.check_dim(block.p())?;
        let sw = sweep(block, beta_check.as_slice(), ties, Detail::Totals)?;
        let info = &self.cuee_info + &sw.information;
        let s = &self.cuee_s + &sw.information * beta_check;
        let xi = &self.cuee_xi + &sw.score;
        let beta = spd_solve(&info, &(&s + &xi), "accumulated intermediary information")?;
        let variance = spd_inverse(&info, "accumulated intermediary information")?;
        self.cuee_info = info;
        self.cuee_s = s;
        self.cuee_xi = xi;
        self.cuee_beta = beta.clone();
        Ok(Estimate { beta, variance })
    }

    /// Runs the full per-block pipeline. On any error the state is left
    /// exactly as it was.
    pub fn process_block(&mut self, block: &DataBlock, cfg: &StreamConfig) -> Result<BlockOutcome> {
        self.check_dim(block.p())?;
        cfg.validate(self.p)?;
        let mut next = self.clone();
        let k = next.k + 1;

        let fit = fit_cox(block, &vec![0.0; self.p], &cfg.solver)?;
        if !fit.converged {
            return Err(CoxError::NotConverged { iterations: fit.iterations, score_norm: fit.score_norm });
        }
        let cee = next.cee_update(&fit)?;
        let beta_check = next.cuee_intermediary(&fit)?;
        let cuee = next.cuee_update(block, &beta_check, cfg.ties)?;

        let resolve = |point: &EvalPoint| -> DVector<f64> {
            match point {
                EvalPoint::Cuee => cuee.beta.clone(),
                EvalPoint::Cee => cee.beta.clone(),
                EvalPoint::BlockMle => fit.beta_hat.clone(),
                EvalPoint::Fixed(b) => DVector::from_column_slice(b),
            }
        };
        let cumulative_eval = resolve(&cfg.cumulative_eval);
        let window_eval = resolve(&cfg.window_eval);

        let summarize = |beta: &DVector<f64>| -> Result<BlockSummary> {
            let mut s = block_summary(block, beta.as_slice(), cfg.transform, cfg.ties)?;
            s.k = k;
            s.beta_blk = Some(fit.beta_hat.clone());
            Ok(s)
        };
        let cum_summary = summarize(&cumulative_eval)?;
        let win_summary = if window_eval == cumulative_eval { cum_summary.clone() } else { summarize(&window_eval)? };

        let cumulative = next.update_cumulative(&cum_summary)?;
        next.push_window(win_summary.clone())?;
        let window = next.window_test(next.w)?;

        *self = next;
        Ok(BlockOutcome {
            k,
            n_k: block.len(),
            d_k: block.event_count(),
            fit,
            cee,
            beta_check,
            cuee,
            cumulative,
            window,
            cumulative_eval,
            window_eval,
            cumulative_summary: cum_summary,
            window_summary: win_summary,
        })
    }
}
