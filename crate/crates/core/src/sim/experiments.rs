use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::config::SimConfig;
use super::generate::stream_block;
use crate::error::{CoxError, Result};
use crate::gt_test::{full_test, HMode};
use crate::online::{OnlineState, StreamConfig};
use crate::par::{map_indices, Execution};
use crate::survival::{DataBlock, SubjectRecord};

/// Both statistics at one block of one replicate stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepStat {
    pub t_cum: f64,
    pub p_cum: f64,
    pub t_win: f64,
    pub p_win: f64,
}

/// One replicate stream; `steps[k - 1]` is `None` when block k failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateTrace {
    pub replicate: usize,
    pub steps: Vec<Option<StepStat>>,
}

impl ReplicateTrace {
    pub fn failures(&self) -> usize {
        self.steps.iter().filter(|s| s.is_none()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub k: usize,
    pub rate: f64,
    /// Binomial Monte-Carlo standard error of `rate`.
    pub mc_se: f64,
    /// Replicates contributing at this k.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionCurve {
    pub cumulative: Vec<RatePoint>,
    pub window: Vec<RatePoint>,
}

impl RejectionCurve {
    fn first_above(points: &[RatePoint], level: f64) -> Option<usize> {
        points.iter().find(|p| p.rate > level).map(|p| p.k)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub alpha: f64,
    pub curve: RejectionCurve,
    pub traces: Vec<ReplicateTrace>,
    /// Total (replicate, block) pairs that failed and were left out.
    pub excluded: usize,
}

/// Long-format row: one per (replicate, k, version).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TidyRow {
    pub replicate: usize,
    pub k: usize,
    pub version: &'static str,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub reject: Option<u8>,
}

impl ExperimentOutput {
    pub fn tidy_rows(&self) -> Vec<TidyRow> {
        let mut rows = Vec::new();
        for trace in &self.traces {
            for (i, step) in trace.steps.iter().enumerate() {
                let k = i + 1;
                let pairs = [
                    ("cumulative", step.map(|s| (s.t_cum, s.p_cum))),
                    ("window", step.map(|s| (s.t_win, s.p_win))),
                ];
                for (version, v) in pairs {
                    rows.push(TidyRow {
                        replicate: trace.replicate,
                        k,
                        version,
                        statistic: v.map(|v| v.0),
                        p_value: v.map(|v| v.1),
                        reject: v.map(|v| (v.1 < self.alpha) as u8),
                    });
                }
            }
        }
        rows
    }
}

#[derive(Debug, Clone)]
pub struct PowerOutput {
    pub output: ExperimentOutput,
    /// First k where the rejection rate exceeds one half.
    pub first_cumulative_above_half: Option<usize>,
    pub first_window_above_half: Option<usize>,
}

/// Runs one simulated stream through the online engine.
pub fn run_replicate(cfg: &SimConfig, replicate: usize) -> Result<ReplicateTrace> {
    let stream_cfg = cfg.stream_config();
    let mut state = OnlineState::new(cfg.p(), cfg.window)?;
    let steps = (1..=cfg.blocks)
        .map(|k| {
            let block = stream_block(cfg, replicate, k).ok()?;
            let out = state.process_block(&block, &stream_cfg).ok()?;
            Some(StepStat {
                t_cum: out.cumulative.statistic,
                p_cum: out.cumulative.p_value,
                t_win: out.window.statistic,
                p_win: out.window.p_value,
            })
        })
        .collect();
    Ok(ReplicateTrace { replicate, steps })
}

fn rejection_curve(traces: &[ReplicateTrace], blocks: usize, alpha: f64) -> RejectionCurve {
    let point = |k: usize, pick: &dyn Fn(&StepStat) -> f64| {
        let vals: Vec<bool> = traces.iter().filter_map(|t| t.steps[k - 1].as_ref()).map(|s| pick(s) < alpha).collect();
        let n = vals.len();
        let rate = if n == 0 { f64::NAN } else { vals.iter().filter(|&&r| r).count() as f64 / n as f64 };
        RatePoint { k, rate, mc_se: (rate * (1.0 - rate) / n as f64).sqrt(), n }
    };
    RejectionCurve {
        cumulative: (1..=blocks).map(|k| point(k, &|s| s.p_cum)).collect(),
        window: (1..=blocks).map(|k| point(k, &|s| s.p_win)).collect(),
    }
}

fn run_all(cfg: &SimConfig, exec: Execution) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let traces = map_indices(exec, cfg.replicates, |r| run_replicate(cfg, r)).into_iter().collect::<Result<Vec<_>>>()?;
    let excluded = traces.iter().map(|t| t.failures()).sum();
    Ok(ExperimentOutput {
        alpha: cfg.alpha,
        curve: rejection_curve(&traces, cfg.blocks, cfg.alpha),
        traces,
        excluded,
    })
}

/// Empirical size of both statistics at every block under the null.
pub fn size_experiment(cfg: &SimConfig, exec: Execution) -> Result<ExperimentOutput> {
    if !cfg.scenario.is_null() {
        return Err(CoxError::InvalidInput("size experiment requires the null scenario".into()));
    }
    run_all(cfg, exec)
}

/// Empirical power of both statistics under an alternative scenario.
pub fn power_experiment(cfg: &SimConfig, exec: Execution) -> Result<PowerOutput> {
    if cfg.scenario.is_null() {
        return Err(CoxError::InvalidInput("power experiment requires an alternative scenario".into()));
    }
    let output = run_all(cfg, exec)?;
    Ok(PowerOutput {
        first_cumulative_above_half: RejectionCurve::first_above(&output.curve.cumulative, 0.5),
        first_window_above_half: RejectionCurve::first_above(&output.curve.window, 0.5),
        output,
    })
}

/// Online and pooled-data statistics at one checkpoint, paired by replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqSample {
    pub k: usize,
    pub online: Vec<f64>,
    pub pooled: Vec<f64>,
}

/// For each replicate, records the cumulative statistic T_k and the
/// statistic recomputed on the concatenation of blocks 1..=k.
pub fn qq_experiment(cfg: &SimConfig, checkpoints: &[usize], exec: Execution) -> Result<Vec<QqSample>> {
    cfg.validate()?;
    if !cfg.scenario.is_null() {
        return Err(CoxError::InvalidInput("QQ experiment requires the null scenario".into()));
    }
    if checkpoints.iter().any(|&k| k == 0 || k > cfg.blocks) {
        return Err(CoxError::InvalidInput("checkpoints must lie within the stream".into()));
    }
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let stream_cfg = cfg.stream_config();

    let per_rep = map_indices(exec, cfg.replicates, |r| -> Option<Vec<(f64, f64)>> {
        let mut state = OnlineState::new(cfg.p(), cfg.window).ok()?;
        let mut blocks = Vec::with_capacity(last);
        let mut online = vec![f64::NAN; last];
        for k in 1..=last {
            let block = stream_block(cfg, r, k).ok()?;
            online[k - 1] = state.process_block(&block, &stream_cfg).ok()?.cumulative.statistic;
            blocks.push(block);
        }
        checkpoints
            .iter()
            .map(|&k| {
                let pooled = DataBlock::pooled(k, &blocks[..k]).ok()?;
                let t = full_test(&pooled, cfg.transform, cfg.ties, HMode::Simplified).ok()?;
                Some((online[k - 1], t.statistic))
            })
            .collect()
    });

    Ok(checkpoints
        .iter()
        .enumerate()
        .map(|(c, &k)| {
            let pairs: Vec<(f64, f64)> = per_rep.iter().flatten().map(|v| v[c]).collect();
            QqSample { k, online: pairs.iter().map(|p| p.0).collect(), pooled: pairs.iter().map(|p| p.1).collect() }
        })
        .collect())
}

/// Terminal cumulative statistic of a stream of blocks.
pub fn terminal_cumulative(blocks: &[DataBlock], cfg: &StreamConfig) -> Result<f64> {
    let p = blocks.first().ok_or_else(|| CoxError::InvalidInput("no blocks".into()))?.p();
    let mut state = OnlineState::new(p, cfg.window)?;
    let mut last = None;
    for b in blocks {
        last = Some(state.process_block(b, cfg)?.cumulative.statistic);
    }
    last.ok_or_else(|| CoxError::InvalidInput("no blocks".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationResult {
    pub observed: f64,
    pub permuted: Vec<f64>,
    /// (1 + #{permuted ≥ observed}) / (n_perm + 1).
    pub p_value: f64,
    /// Shuffles discarded because a re-partitioned block had no events or
    /// its stream failed.
    pub retries: usize,
}

const MAX_RETRIES_PER_PERMUTATION: usize = 100;

/// Tests whether the arrival order of subjects matters: pools all records,
/// shuffles, re-splits into the original block sizes and recomputes the
/// terminal cumulative statistic.
pub fn permutation_experiment<R: Rng + ?Sized>(
    blocks: &[DataBlock],
    n_perm: usize,
    rng: &mut R,
    cfg: &StreamConfig,
) -> Result<PermutationResult> {
    if n_perm == 0 {
        return Err(CoxError::InvalidInput("number of permutations must be at least 1".into()));
    }
    if blocks.len() < 2 {
        return Err(CoxError::InvalidInput("permutation needs at least two blocks".into()));
    }
    let observed = terminal_cumulative(blocks, cfg)?;
    let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
    let mut pool: Vec<SubjectRecord> = blocks.iter().flat_map(|b| b.records()).collect();

    let mut permuted = Vec::with_capacity(n_perm);
    let mut retries = 0;
    while permuted.len() < n_perm {
        pool.shuffle(rng);
        let mut start = 0;
        let split: Result<Vec<DataBlock>> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let b = DataBlock::new(i + 1, pool[start..start + n].to_vec());
                start += n;
                b
            })
            .collect();
        match split.and_then(|bs| terminal_cumulative(&bs, cfg)) {
            Ok(t) => permuted.push(t),
            Err(_) => {
                retries += 1;
                if retries > MAX_RETRIES_PER_PERMUTATION * n_perm {
                    return Err(CoxError::InvalidInput("too many failed permutations".into()));
                }
            }
        }
    }
    let exceed = permuted.iter().filter(|&&t| t >= observed).count();
    Ok(PermutationResult {
        observed,
        p_value: (1 + exceed) as f64 / (n_perm + 1) as f64,
        permuted,
        retries,
    })
}
