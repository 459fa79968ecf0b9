//! Risk-set sums over a time-sorted block.
//!
//! Everything (log partial likelihood, score, information and the per-event
//! risk-set moments behind the Schoenfeld residuals) comes out of a single
//! backward sweep over event times with running sums, O(n·p²) per call.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::DataBlock;
use crate::error::{CoxError, Result};

/// Handling of tied event times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

impl std::str::FromStr for Ties {
    type Err = CoxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "efron" => Ok(Ties::Efron),
            "breslow" => Ok(Ties::Breslow),
            other => Err(CoxError::InvalidInput(format!("unknown ties method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Detail {
    Totals,
    Means,
    MeansAndVariances,
}

/// Output of one sweep. Per-event fields are populated according to the
/// requested [`Detail`] and are in ascending event-time order.
#[derive(Debug, Clone)]
pub(crate) struct Sweep {
    pub log_pl: f64,
    pub score: DVector<f64>,
    pub information: DMatrix<f64>,
    pub event_times: Vec<f64>,
    /// Sorted-block index of the subject failing at each event.
    pub event_subjects: Vec<usize>,
    /// Row-major d×p risk-set means (uncentered).
    pub event_means: Vec<f64>,
    /// d blocks of p×p risk-set variances, row-major.
    pub event_variances: Vec<f64>,
}

fn check_beta(block: &DataBlock, beta: &[f64]) -> Result<()> {
    if beta.len() != block.p() {
        return Err(CoxError::DimensionMismatch { expected: block.p(), found: beta.len() });
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(CoxError::InvalidInput("beta must be finite".into()));
    }
    Ok(())
}

pub(crate) fn sweep(block: &DataBlock, beta: &[f64], ties: Ties, detail: Detail) -> Result<Sweep> {
    check_beta(block, beta)?;
    let n = block.len();
    let p = block.p();
    let center = block.center();
    let times = block.times();
    let status = block.statuses();

    let xc = block.centered_covariates();
    let eta: Vec<f64> = xc.chunks_exact(p).map(|row| row.iter().zip(beta).map(|(x, b)| x * b).sum()).collect();
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![0.0; p * p];
    let mut a1 = vec![0.0; p];
    let mut a2 = vec![0.0; p * p];
    let mut xsum = vec![0.0; p];
    let mut mean = vec![0.0; p];
    let mut mean_acc = vec![0.0; p];
    let mut var_acc = vec![0.0; p * p];

    let mut log_pl = 0.0;
    let mut score = vec![0.0; p];
    let mut info = vec![0.0; p * p];

    let d_total = block.event_count();
    let per_event = detail >= Detail::Means;
    let mut ev_times = Vec::with_capacity(if per_event { d_total } else { 0 });
    let mut ev_subj = Vec::with_capacity(if per_event { d_total } else { 0 });
    let mut ev_means = Vec::with_capacity(if per_event { d_total * p } else { 0 });
    let mut ev_vars =
        Vec::with_capacity(if detail == Detail::MeansAndVariances { d_total * p * p } else { 0 });

    let mut hi = n;
    while hi > 0 {
        let t = times[hi - 1];
        let mut lo = hi - 1;
        while lo > 0 && times[lo - 1] == t {
            lo -= 1;
        }

        let mut d = 0usize;
        let mut a0 = 0.0;
        let mut eta_sum = 0.0;
        a1.iter_mut().for_each(|v| *v = 0.0);
        a2.iter_mut().for_each(|v| *v = 0.0);
        xsum.iter_mut().for_each(|v| *v = 0.0);

        for i in lo..hi {
            let wi = w[i];
            let xi = &xc[i * p..(i + 1) * p];
            s0 += wi;
            for j in 0..p {
                s1[j] += wi * xi[j];
                for l in j..p {
                    s2[j * p + l] += wi * xi[j] * xi[l];
                }
            }
            if status[i] {
                d += 1;
                a0 += wi;
                eta_sum += eta[i] - shift;
                for j in 0..p {
                    xsum[j] += xi[j];
                    a1[j] += wi * xi[j];
                    for l in j..p {
                        a2[j * p + l] += wi * xi[j] * xi[l];
                    }
                }
            }
        }

        if d > 0 {
            log_pl += eta_sum;
            for j in 0..p {
                score[j] += xsum[j];
            }
            mean_acc.iter_mut().for_each(|v| *v = 0.0);
            var_acc.iter_mut().for_each(|v| *v = 0.0);

            let repeats = match ties {
                Ties::Breslow => 1,
                Ties::Efron => d,
            };
            for r in 0..repeats {
                let (frac, mult) = match ties {
                    Ties::Breslow => (0.0, d as f64),
                    Ties::Efron => (r as f64 / d as f64, 1.0),
                };
                let den = s0 - frac * a0;
                let inv = 1.0 / den;
                let share = mult / d as f64;
                log_pl -= mult * den.ln();
                for j in 0..p {
                    mean[j] = (s1[j] - frac * a1[j]) * inv;
                    score[j] -= mult * mean[j];
                    mean_acc[j] += share * mean[j];
                }
                for j in 0..p {
                    for l in j..p {
                        let v = (s2[j * p + l] - frac * a2[j * p + l]) * inv - mean[j] * mean[l];
                        info[j * p + l] += mult * v;
                        var_acc[j * p + l] += share * v;
                    }
                }
            }

            if per_event {
                for i in (lo..hi).rev().filter(|&i| status[i]) {
                    ev_times.push(t);
                    ev_subj.push(i);
                    ev_means.extend(mean_acc.iter().zip(center).map(|(m, c)| m + c));
                    if detail == Detail::MeansAndVariances {
                        for j in 0..p {
                            for l in 0..p {
                                let (a, b) = if j <= l { (j, l) } else { (l, j) };
                                ev_vars.push(var_acc[a * p + b]);
                            }
                        }
                    }
                }
            }
        }
        hi = lo;
    }

    for j in 0..p {
        for l in 0..j {
            info[j * p + l] = info[l * p + j];
        }
    }

    if per_event {
        ev_times.reverse();
        ev_subj.reverse();
        reverse_rows(&mut ev_means, p);
        if detail == Detail::MeansAndVariances {
            reverse_rows(&mut ev_vars, p * p);
        }
    }

    Ok(Sweep {
        log_pl,
        score: DVector::from_vec(score),
        information: DMatrix::from_row_slice(p, p, &info),
        event_times: ev_times,
        event_subjects: ev_subj,
        event_means: ev_means,
        event_variances: ev_vars,
    })
}

fn reverse_rows(v: &mut [f64], width: usize) {
    let rows = v.len() / width;
    for r in 0..rows / 2 {
        let (a, b) = (r * width, (rows - 1 - r) * width);
        for c in 0..width {
            v.swap(a + c, b + c);
        }
    }
}

/// Log partial likelihood at `beta`.
pub fn log_partial_likelihood(block: &DataBlock, beta: &[f64], ties: Ties) -> Result<f64> {
    Ok(sweep(block, beta, ties, Detail::Totals)?.log_pl)
}

/// Score vector U(β), the gradient of the log partial likelihood.
pub fn score(block: &DataBlock, beta: &[f64], ties: Ties) -> Result<DVector<f64>> {
    Ok(sweep(block, beta, ties, Detail::Totals)?.score)
}

/// Observed information, the negative Hessian of the log partial likelihood.
pub fn information(block: &DataBlock, beta: &[f64], ties: Ties) -> Result<DMatrix<f64>> {
    Ok(sweep(block, beta, ties, Detail::Totals)?.information)
}

/// Risk-score weighted mean of the covariates over subjects with `time >= t`.
pub fn weighted_mean_covariates(block: &DataBlock, beta: &[f64], t: f64) -> Result<DVector<f64>> {
    let (w, at_risk) = risk_weights(block, beta, t)?;
    let p = block.p();
    let total: f64 = w.iter().sum();
    let mut m = DVector::zeros(p);
    for (&i, wi) in at_risk.iter().zip(&w) {
        for (j, x) in block.covariates(i).iter().enumerate() {
            m[j] += wi * x;
        }
    }
    Ok(m / total)
}

/// Risk-score weighted covariance of the covariates over subjects with `time >= t`.
pub fn weighted_variance(block: &DataBlock, beta: &[f64], t: f64) -> Result<DMatrix<f64>> {
    let mean = weighted_mean_covariates(block, beta, t)?;
    let (w, at_risk) = risk_weights(block, beta, t)?;
    let p = block.p();
    let total: f64 = w.iter().sum();
    let mut v = DMatrix::zeros(p, p);
    for (&i, wi) in at_risk.iter().zip(&w) {
        let dev = DVector::from_column_slice(block.covariates(i)) - &mean;
        v += (&dev * dev.transpose()) * *wi;
    }
    Ok(crate::linalg::symmetrize(v / total))
}

fn risk_weights(block: &DataBlock, beta: &[f64], t: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    check_beta(block, beta)?;
    let start = block.times().partition_point(|&s| s < t);
    if start == block.len() {
        return Err(CoxError::EmptyRiskSet { t });
    }
    let at_risk: Vec<usize> = (start..block.len()).collect();
    let eta: Vec<f64> = at_risk
        .iter()
        .map(|&i| block.covariates(i).iter().zip(beta).map(|(x, b)| x * b).sum())
        .collect();
    let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((eta.iter().map(|e| (e - shift).exp()).collect(), at_risk))
}
