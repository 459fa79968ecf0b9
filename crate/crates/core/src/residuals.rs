//! Schoenfeld residuals and the centered time transforms g(t).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CoxError, Result};
use crate::survival::{sweep, DataBlock, Detail, Ties};

/// Time scale against which residuals are tested.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Identity,
    Log,
    /// Left-continuous Kaplan-Meier survival estimate.
    #[default]
    KaplanMeier,
}

impl std::str::FromStr for TransformKind {
    type Err = CoxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "log" => Ok(Self::Log),
            "km" | "kaplan-meier" => Ok(Self::KaplanMeier),
            other => Err(CoxError::InvalidInput(format!("unknown transform '{other}'"))),
        }
    }
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::Log => "log",
            Self::KaplanMeier => "km",
        })
    }
}

/// Residuals at each event, in ascending event-time order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub event_times: Vec<f64>,
    /// d×p, row ℓ is the residual of the ℓth event.
    pub residuals: DMatrix<f64>,
    /// Centered transform values, filled by [`ResidualSet::with_transform`].
    pub g_centered: Option<Vec<f64>>,
    pub beta_eval: Vec<f64>,
}

impl ResidualSet {
    pub fn with_transform(mut self, kind: TransformKind, block: &DataBlock) -> Result<Self> {
        self.g_centered = Some(transform_and_center(&self.event_times, kind, block)?);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.event_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_times.is_empty()
    }
}

/// Covariate of the failing subject minus the risk-set mean at each event.
///
/// With Efron ties the risk-set mean is averaged over the tied failures, so
/// the residuals sum to the Efron score.
pub fn schoenfeld_residuals(block: &DataBlock, beta: &[f64], ties: Ties) -> Result<ResidualSet> {
    let sw = sweep(block, beta, ties, Detail::Means)?;
    Ok(residuals_from_sweep(block, beta, &sw.event_times, &sw.event_subjects, &sw.event_means))
}

pub(crate) fn residuals_from_sweep(
    block: &DataBlock,
    beta: &[f64],
    event_times: &[f64],
    event_subjects: &[usize],
    event_means: &[f64],
) -> ResidualSet {
    let p = block.p();
    let d = event_times.len();
    let residuals = DMatrix::from_fn(d, p, |l, j| {
        block.covariates(event_subjects[l])[j] - event_means[l * p + j]
    });
    ResidualSet {
        event_times: event_times.to_vec(),
        residuals,
        g_centered: None,
        beta_eval: beta.to_vec(),
    }
}

/// S(t−) at each event time of `block`, in ascending order (tied events
/// share a value). The product runs over event times strictly before t.
pub fn km_left_continuous(block: &DataBlock) -> Vec<f64> {
    km_before(block, &block.event_times())
}

/// S(t−) of `block`'s product-limit curve at arbitrary ascending `times`.
fn km_before(block: &DataBlock, times: &[f64]) -> Vec<f64> {
    let bt = block.times();
    let st = block.statuses();
    let n = bt.len();
    let mut out = Vec::with_capacity(times.len());
    let mut surv = 1.0;
    let mut i = 0;
    for &t in times {
        while i < n && bt[i] < t {
            let tj = bt[i];
            let at_risk = n - i;
            let mut deaths = 0;
            while i < n && bt[i] == tj {
                deaths += st[i] as usize;
                i += 1;
            }
            surv *= 1.0 - deaths as f64 / at_risk as f64;
        }
        out.push(surv);
    }
    out
}

/// Raw transform values g(t) at `event_times`.
pub fn transform_raw(event_times: &[f64], kind: TransformKind, block: &DataBlock) -> Result<Vec<f64>> {
    match kind {
        TransformKind::Identity => Ok(event_times.to_vec()),
        TransformKind::Log => event_times
            .iter()
            .map(|&t| if t > 0.0 { Ok(t.ln()) } else { Err(CoxError::InvalidTime { t }) })
            .collect(),
        TransformKind::KaplanMeier => {
            if event_times.windows(2).all(|w| w[0] <= w[1]) {
                Ok(km_before(block, event_times))
            } else {
                let mut order: Vec<usize> = (0..event_times.len()).collect();
                order.sort_by(|&a, &b| event_times[a].total_cmp(&event_times[b]));
                let sorted: Vec<f64> = order.iter().map(|&i| event_times[i]).collect();
                let vals = km_before(block, &sorted);
                let mut out = vec![0.0; vals.len()];
                for (v, &i) in vals.into_iter().zip(&order) {
                    out[i] = v;
                }
                Ok(out)
            }
        }
    }
}

/// g(t) at the block's events, centered to sum to zero over the block.
pub fn transform_and_center(event_times: &[f64], kind: TransformKind, block: &DataBlock) -> Result<Vec<f64>> {
    if event_times.is_empty() {
        return Err(CoxError::InvalidInput("no event times to transform".into()));
    }
    let mut g = transform_raw(event_times, kind, block)?;
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    for v in &mut g {
        *v -= mean;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::{score, SubjectRecord};

    fn d4() -> DataBlock {
        let rows = [(1.0, 0.0), (2.0, 1.0), (3.0, 0.0), (4.0, 1.0)];
        DataBlock::new(1, rows.iter().map(|&(t, x)| SubjectRecord::new(t, true, vec![x])).collect())
            .unwrap()
    }

    #[test]
    fn d4_residuals_at_zero() {
        let r = schoenfeld_residuals(&d4(), &[0.0], Ties::Efron).unwrap();
        let expected = [-0.5, 1.0 / 3.0, -0.5, 0.0];
        assert_eq!(r.event_times, vec![1.0, 2.0, 3.0, 4.0]);
        for (l, e) in expected.iter().enumerate() {
            assert!((r.residuals[(l, 0)] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn residuals_sum_to_score() {
        let recs = vec![
            SubjectRecord::new(1.0, true, vec![0.3, 1.0]),
            SubjectRecord::new(1.0, true, vec![-0.2, 0.0]),
            SubjectRecord::new(2.0, false, vec![1.1, 1.0]),
            SubjectRecord::new(2.5, true, vec![0.7, 0.0]),
            SubjectRecord::new(3.0, true, vec![-1.0, 1.0]),
            SubjectRecord::new(3.0, true, vec![0.1, 1.0]),
            SubjectRecord::new(3.0, false, vec![0.4, 0.0]),
            SubjectRecord::new(4.0, true, vec![0.0, 0.0]),
        ];
        let b = DataBlock::new(1, recs).unwrap();
        for ties in [Ties::Efron, Ties::Breslow] {
            let beta = [0.4, -0.7];
            let r = schoenfeld_residuals(&b, &beta, ties).unwrap();
            let u = score(&b, &beta, ties).unwrap();
            for j in 0..2 {
                let s: f64 = r.residuals.column(j).iter().sum();
                assert!((s - u[j]).abs() < 1e-12, "{ties:?}: {s} vs {}", u[j]);
            }
        }
    }

    #[test]
    fn km_of_d4() {
        assert_eq!(km_left_continuous(&d4()), vec![1.0, 0.75, 0.5, 0.25]);
    }

    #[test]
    fn km_censoring_before_event_does_not_drop() {
        let b = DataBlock::new(
            1,
            vec![SubjectRecord::new(1.0, false, vec![0.0]), SubjectRecord::new(2.0, true, vec![1.0])],
        )
        .unwrap();
        assert_eq!(km_left_continuous(&b), vec![1.0]);
    }

    #[test]
    fn km_tied_events_share_value() {
        let b = DataBlock::new(
            1,
            vec![
                SubjectRecord::new(1.0, true, vec![0.0]),
                SubjectRecord::new(2.0, true, vec![0.0]),
                SubjectRecord::new(2.0, true, vec![0.0]),
                SubjectRecord::new(3.0, true, vec![0.0]),
            ],
        )
        .unwrap();
        assert_eq!(km_left_continuous(&b), vec![1.0, 0.75, 0.75, 0.25]);
    }

    #[test]
    fn centered_transforms_of_d4() {
        let b = d4();
        let times = b.event_times();
        let id = transform_and_center(&times, TransformKind::Identity, &b).unwrap();
        assert_eq!(id, vec![-1.5, -0.5, 0.5, 1.5]);
        let km = transform_and_center(&times, TransformKind::KaplanMeier, &b).unwrap();
        for (a, e) in km.iter().zip([0.375, 0.125, -0.125, -0.375]) {
            assert!((a - e).abs() < 1e-15);
        }
        let single = transform_and_center(&[2.0], TransformKind::Log, &b).unwrap();
        assert_eq!(single, vec![0.0]);
    }

    #[test]
    fn log_transform_rejects_nonpositive_time() {
        let err = transform_and_center(&[1.0, 0.0], TransformKind::Log, &d4()).unwrap_err();
        assert_eq!(err, CoxError::InvalidTime { t: 0.0 });
    }
}
