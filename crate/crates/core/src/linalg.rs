//! Small dense helpers on top of nalgebra for the symmetric p×p systems
//! that show up everywhere (p is the covariate dimension, typically < 20).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CoxError, Result};

/// Relative eigenvalue cutoff below which a direction is treated as null.
pub const EIGEN_RELATIVE_CUTOFF: f64 = 1e-12;

/// Solve `a x = b` for symmetric positive definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| CoxError::SingularInformation(what.to_string()))?;
    let x = chol.solve(b);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(CoxError::SingularInformation(what.to_string()))
    }
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| CoxError::SingularInformation(what.to_string()))?;
    let inv = chol.inverse();
    if inv.iter().all(|v| v.is_finite()) {
        Ok(symmetrize(inv))
    } else {
        Err(CoxError::SingularInformation(what.to_string()))
    }
}

pub fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Quadratic form `qᵀ H⁺ q` through a symmetric eigendecomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoQuadratic {
    pub value: f64,
    pub rank: usize,
}

/// Evaluates `qᵀ H⁺ q` where `H⁺` is the Moore-Penrose inverse of the
/// symmetric matrix `h`. Eigenvalues below `EIGEN_RELATIVE_CUTOFF` times
/// the largest eigenvalue are dropped and the retained count is the rank.
pub fn pseudo_quadratic(h: &DMatrix<f64>, q: &DVector<f64>) -> Result<PseudoQuadratic> {
    if h.iter().chain(q.iter()).any(|v| !v.is_finite()) {
        return Err(CoxError::SingularH);
    }
    let eig = SymmetricEigen::new(symmetrize(h.clone()));
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return Ok(PseudoQuadratic { value: 0.0, rank: 0 });
    }
    let cutoff = EIGEN_RELATIVE_CUTOFF * max;
    let mut value = 0.0;
    let mut rank = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let proj = eig.eigenvectors.column(i).dot(q);
            value += proj * proj / lambda;
            rank += 1;
        }
    }
    Ok(PseudoQuadratic { value: value.max(0.0), rank })
}

pub fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
