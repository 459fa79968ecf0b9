use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::serde_mat;
use crate::error::Result;
use crate::residuals::{residuals_from_sweep, transform_and_center, TransformKind};
use crate::survival::{sweep, DataBlock, Detail, Ties};

/// Everything the stream keeps from one block once the block is gone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub k: usize,
    pub n_k: usize,
    pub d_k: usize,
    /// (Σ g²/d_k)·𝓘 at the evaluation point.
    #[serde(with = "serde_mat::matrix")]
    pub h_blk: DMatrix<f64>,
    /// Σ g_ℓ r̂_ℓ.
    #[serde(with = "serde_mat::vector")]
    pub q_blk: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub info: DMatrix<f64>,
    #[serde(with = "serde_mat::vector")]
    pub score_at_eval: DVector<f64>,
    #[serde(with = "serde_mat::vector")]
    pub beta_eval: DVector<f64>,
    #[serde(with = "serde_mat::opt_vector")]
    pub beta_blk: Option<DVector<f64>>,
    /// 𝓘 at the evaluation point failed a Cholesky factorization.
    pub info_singular: bool,
}

/// Reduces `block` to its (H, Q) contribution with residuals and
/// information evaluated at `beta_eval`.
pub fn block_summary(
    block: &DataBlock,
    beta_eval: &[f64],
    kind: TransformKind,
    ties: Ties,
) -> Result<BlockSummary> {
    let sw = sweep(block, beta_eval, ties, Detail::Means)?;
    let res = residuals_from_sweep(block, beta_eval, &sw.event_times, &sw.event_subjects, &sw.event_means);
    let g = transform_and_center(&res.event_times, kind, block)?;
    let d = g.len();
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let q_blk = res.residuals.tr_mul(&DVector::from_column_slice(&g));
    let h_blk = &sw.information * (g2 / d as f64);
    let info_singular = sw.information.clone().cholesky().is_none();
    Ok(BlockSummary {
        k: block.index(),
        n_k: block.len(),
        d_k: d,
        h_blk,
        q_blk,
        info: sw.information,
        score_at_eval: sw.score,
        beta_eval: DVector::from_column_slice(beta_eval),
        beta_blk: None,
        info_singular,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::SubjectRecord;

    fn d4() -> DataBlock {
        let rows = [(1.0, 0.0), (2.0, 1.0), (3.0, 0.0), (4.0, 1.0)];
        DataBlock::new(1, rows.iter().map(|&(t, x)| SubjectRecord::new(t, true, vec![x])).collect())
            .unwrap()
    }

    #[test]
    fn d4_identity_summary() {
        let s = block_summary(&d4(), &[0.0], TransformKind::Identity, Ties::Efron).unwrap();
        assert!((s.q_blk[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.h_blk[(0, 0)] - 65.0 / 72.0).abs() < 1e-12);
        assert!((s.score_at_eval[0] + 2.0 / 3.0).abs() < 1e-12);
        assert_eq!((s.n_k, s.d_k), (4, 4));
    }

    #[test]
    fn single_event_block_contributes_nothing() {
        let b = DataBlock::new(
            3,
            vec![
                SubjectRecord::new(1.0, false, vec![0.2]),
                SubjectRecord::new(2.0, true, vec![1.0]),
                SubjectRecord::new(5.0, false, vec![-0.4]),
            ],
        )
        .unwrap();
        let s = block_summary(&b, &[0.3], TransformKind::KaplanMeier, Ties::Efron).unwrap();
        assert_eq!(s.k, 3);
        assert_eq!(s.h_blk[(0, 0)], 0.0);
        assert_eq!(s.q_blk[0], 0.0);
    }
}
