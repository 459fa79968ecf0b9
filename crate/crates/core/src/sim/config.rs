use serde::{Deserialize, Serialize};

use crate::error::{CoxError, Result};
use crate::online::{EvalPoint, StreamConfig};
use crate::residuals::TransformKind;
use crate::survival::{SolverOptions, Ties};

/// Data-generating regime. Alternatives switch on at `change_block`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Scenario {
    Null,
    /// Subject-level N(0, σ²) term added to the log hazard.
    Frailty { sigma: f64 },
    /// The first coefficient increases by δ.
    BetaShift { delta: f64 },
}

impl Scenario {
    pub fn is_null(&self) -> bool {
        matches!(self, Scenario::Null)
    }
}

impl std::str::FromStr for Scenario {
    type Err = CoxError;

    /// `null`, `frailty:SIGMA` or `shift:DELTA`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CoxError::InvalidInput(format!("unknown scenario '{s}' (null | frailty:SIGMA | shift:DELTA)"));
        match s.split_once(':') {
            None if s == "null" => Ok(Scenario::Null),
            Some(("frailty", v)) => Ok(Scenario::Frailty { sigma: v.parse().map_err(|_| bad())? }),
            Some(("shift", v)) => Ok(Scenario::BetaShift { delta: v.parse().map_err(|_| bad())? }),
            _ => Err(bad()),
        }
    }
}

/// Simulation settings. Defaults reproduce the reference design at desk
/// scale: three covariates, constant baseline hazard 0.018, censoring as a
/// mixture of a point mass at 60 and Uniform(0, 60).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Blocks per stream (K).
    pub blocks: usize,
    /// Subjects per block (n_k).
    pub block_size: usize,
    pub beta: Vec<f64>,
    pub lambda0: f64,
    /// Weight of the point mass at the administrative censoring time.
    pub epsilon: f64,
    pub scenario: Scenario,
    /// First block generated under the alternative (1-based).
    pub change_block: usize,
    pub transform: TransformKind,
    pub ties: Ties,
    pub window: usize,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    pub cumulative_eval: EvalPoint,
    pub window_eval: EvalPoint,
}

/// End of follow-up; also the point mass of the censoring mixture.
pub const FOLLOW_UP: f64 = 60.0;

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            blocks: 50,
            block_size: 1000,
            beta: vec![0.67, -0.26, 0.36],
            lambda0: 0.018,
            epsilon: 0.9,
            scenario: Scenario::Null,
            change_block: 51,
            transform: TransformKind::KaplanMeier,
            ties: Ties::Efron,
            window: 5,
            replicates: 500,
            seed: 20_190_601,
            alpha: 0.05,
            cumulative_eval: EvalPoint::Cuee,
            window_eval: EvalPoint::Cee,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoxError::InvalidInput(m.to_string()));
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return bad("lambda0 must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.blocks == 0 || self.block_size == 0 {
            return bad("blocks and block size must be positive");
        }
        if self.beta.is_empty() || self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta must be a non-empty finite vector");
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1");
        }
        if self.window == 0 {
            return bad("window width must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !self.scenario.is_null() && (self.change_block == 0 || self.change_block > self.blocks) {
            return bad("change block must lie within the stream");
        }
        match self.scenario {
            Scenario::Frailty { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => bad("sigma must be nonnegative"),
            Scenario::BetaShift { delta } if !delta.is_finite() => bad("delta must be finite"),
            _ => Ok(()),
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn stream_config(&self) -> StreamConfig {
        StreamConfig {
            transform: self.transform,
            ties: self.ties,
            window: self.window,
            cumulative_eval: self.cumulative_eval.clone(),
            window_eval: self.window_eval.clone(),
            solver: SolverOptions { ties: self.ties, ..Default::default() },
        }
    }
}
