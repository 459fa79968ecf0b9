//! Global test of proportional hazards from scaled Schoenfeld residuals,
//! and the χ² reference distribution shared by all test variants.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{CoxError, Result};
use crate::linalg::{pseudo_quadratic, spd_inverse};
use crate::residuals::{residuals_from_sweep, transform_and_center, TransformKind};
use crate::survival::{fit_cox, sweep, DataBlock, Detail, SolverOptions, Ties};

/// Which statistic a [`TestResult`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TestVersion {
    Full,
    Cumulative,
    /// `partial` is set while fewer than `width` blocks have arrived.
    Window { width: usize, partial: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub version: TestVersion,
    /// Block index, 0 for a full-data test.
    pub k: usize,
    /// Set when H had to be pseudo-inverted.
    pub rank_deficient: bool,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// How the variance matrix H of Q is formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HMode {
    /// Per-event variance replaced by 𝓘/d, so H = (Σ g²/d)·𝓘.
    #[default]
    Simplified,
    /// Per-event variances with the cross term.
    Exact,
}

impl std::str::FromStr for HMode {
    type Err = CoxError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simplified" => Ok(Self::Simplified),
            "exact" => Ok(Self::Exact),
            other => Err(CoxError::InvalidInput(format!("unknown h-mode '{other}'"))),
        }
    }
}

/// Upper tail P(χ²_df > x).
pub fn chisq_sf(x: f64, df: usize) -> Result<f64> {
    if df < 1 {
        return Err(CoxError::InvalidInput("degrees of freedom must be at least 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(CoxError::InvalidInput(format!("chi-square argument must be nonnegative, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(statrs::function::gamma::gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// Quantile of χ²_df at lower-tail probability `prob`.
pub fn chisq_quantile(prob: f64, df: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(CoxError::InvalidInput(format!("probability {prob} outside [0, 1]")));
    }
    let dist = ChiSquared::new(df as f64).map_err(|e| CoxError::InvalidInput(e.to_string()))?;
    Ok(dist.inverse_cdf(prob))
}

/// Forms `QᵀH⁺Q` and its p-value. A rank-deficient H reduces the degrees
/// of freedom to its rank; an all-zero H yields a zero statistic.
pub fn assemble(q: &DVector<f64>, h: &DMatrix<f64>, version: TestVersion, k: usize) -> Result<TestResult> {
    let p = q.len();
    let pq = pseudo_quadratic(h, q)?;
    let (statistic, df) = if pq.rank == 0 { (0.0, p) } else { (pq.value, pq.rank) };
    Ok(TestResult {
        statistic,
        df,
        p_value: chisq_sf(statistic, df)?,
        version,
        k,
        rank_deficient: pq.rank < p,
    })
}

/// Fits the whole dataset and tests proportional hazards against g(t).
pub fn full_test(data: &DataBlock, kind: TransformKind, ties: Ties, h_mode: HMode) -> Result<TestResult> {
    let opts = SolverOptions { ties, ..Default::default() };
    let fit = fit_cox(data, &vec![0.0; data.p()], &opts)?;
    if !fit.converged {
        return Err(CoxError::NotConverged { iterations: fit.iterations, score_norm: fit.score_norm });
    }
    full_test_at(data, fit.beta_hat.as_slice(), kind, ties, h_mode)
}

/// Same as [`full_test`] with residuals and variances evaluated at `beta`.
pub fn full_test_at(
    data: &DataBlock,
    beta: &[f64],
    kind: TransformKind,
    ties: Ties,
    h_mode: HMode,
) -> Result<TestResult> {
    let (q, h) = q_and_h(data, beta, kind, ties, h_mode)?;
    assemble(&q, &h, TestVersion::Full, 0)
}

pub(crate) fn q_and_h(
    data: &DataBlock,
    beta: &[f64],
    kind: TransformKind,
    ties: Ties,
    h_mode: HMode,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let detail = match h_mode {
        HMode::Simplified => Detail::Means,
        HMode::Exact => Detail::MeansAndVariances,
    };
    let sw = sweep(data, beta, ties, detail)?;
    let res = residuals_from_sweep(data, beta, &sw.event_times, &sw.event_subjects, &sw.event_means);
    let g = transform_and_center(&res.event_times, kind, data)?;
    let p = data.p();
    let d = g.len();

    let q = res.residuals.tr_mul(&DVector::from_column_slice(&g));
    let h = match h_mode {
        HMode::Simplified => {
            let g2: f64 = g.iter().map(|v| v * v).sum();
            &sw.information * (g2 / d as f64)
        }
        HMode::Exact => {
            let mut gvg = DMatrix::zeros(p, p);
            let mut gv = DMatrix::zeros(p, p);
            for (l, gl) in g.iter().enumerate() {
                let v = DMatrix::from_row_slice(p, p, &sw.event_variances[l * p * p..(l + 1) * p * p]);
                gvg += &v * (gl * gl);
                gv += &v * *gl;
            }
            let vinv = spd_inverse(&sw.information, "sum of event variances").map_err(|_| CoxError::SingularH)?;
            gvg - &gv * vinv * gv.transpose()
        }
    };
    Ok((q, crate::linalg::symmetrize(h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::SubjectRecord;

    #[test]
    fn sf_at_zero_is_one() {
        for df in 1..6 {
            assert_eq!(chisq_sf(0.0, df).unwrap(), 1.0);
        }
    }

    #[test]
    fn sf_two_df_is_exponential() {
        for x in [0.1, 1.0, 3.7, 12.0, 40.0] {
            assert!((chisq_sf(x, 2).unwrap() - (-x / 2.0).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn sf_rejects_bad_input() {
        assert!(chisq_sf(-1.0, 3).is_err());
        assert!(chisq_sf(1.0, 0).is_err());
    }

    #[test]
    fn quantile_inverts_sf() {
        let q = chisq_quantile(0.95, 3).unwrap();
        assert!((q - 7.814727903251178).abs() < 1e-8);
        assert!((chisq_sf(q, 3).unwrap() - 0.05).abs() < 1e-10);
        assert_eq!(chisq_quantile(0.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn single_event_gives_zero_statistic() {
        let recs = vec![
            SubjectRecord::new(1.0, false, vec![0.0]),
            SubjectRecord::new(2.0, true, vec![1.0]),
            SubjectRecord::new(3.0, false, vec![0.0]),
        ];
        let b = DataBlock::new(1, recs).unwrap();
        let r = full_test_at(&b, &[0.0], TransformKind::Identity, Ties::Efron, HMode::Simplified).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(r.rank_deficient);
    }

    #[test]
    fn rejection_rule() {
        let r = assemble(
            &DVector::from_vec(vec![3.0]),
            &DMatrix::from_row_slice(1, 1, &[1.0]),
            TestVersion::Full,
            0,
        )
        .unwrap();
        assert!((r.statistic - 9.0).abs() < 1e-12);
        assert!(r.rejects(0.05));
        assert!(!r.rejects(0.001));
    }
}
