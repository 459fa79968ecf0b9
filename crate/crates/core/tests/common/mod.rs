//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the library's sweep; risk sets are rebuilt from
//! scratch for every event.

#![allow(dead_code)]

use coxstream::online::BlockOutcome;
use coxstream::sim::{stream_block, SimConfig};
use coxstream::survival::{information, score};
use coxstream::{CoxFit, DataBlock, SubjectRecord, Ties, TransformKind};
use nalgebra::{DMatrix, DVector};

/// Maximizer of a unimodal `f` on [a, b].
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Breslow log partial likelihood from first principles (tie-free data
/// makes it equal to Efron's).
pub fn naive_log_pl(records: &[SubjectRecord], beta: &[f64]) -> f64 {
    let eta = |r: &SubjectRecord| r.covariates.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>();
    records
        .iter()
        .filter(|r| r.status)
        .map(|e| {
            let den: f64 = records.iter().filter(|r| r.time >= e.time).map(|r| eta(r).exp()).sum();
            eta(e) - den.ln()
        })
        .sum()
}

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (f(a) + 4.0 * fm + f(b)), fm)
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (left, _) = simpson(f, a, m);
        let (right, _) = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
    }
    let (whole, _) = simpson(f, a, b);
    rec(f, a, b, whole, tol, 50)
}

/// χ²_df density.
pub fn chisq_pdf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = df as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * 2f64.ln() - statrs::function::gamma::ln_gamma(k)).exp()
}

/// Everything an event-by-event recomputation of the global test produces.
pub struct NaiveTest {
    pub q: DVector<f64>,
    pub h_simplified: DMatrix<f64>,
    pub h_exact: DMatrix<f64>,
    pub t_simplified: f64,
    pub t_exact: f64,
    pub g_centered: Vec<f64>,
    pub residual_sum: DVector<f64>,
}

/// S(t−) by direct counting: product over distinct event times s < t of
/// 1 − d(s)/n(s).
pub fn naive_km_before(records: &[SubjectRecord], t: f64) -> f64 {
    let mut times: Vec<f64> = records.iter().filter(|r| r.status && r.time < t).map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .iter()
        .map(|&s| {
            let at_risk = records.iter().filter(|r| r.time >= s).count() as f64;
            let deaths = records.iter().filter(|r| r.status && r.time == s).count() as f64;
            1.0 - deaths / at_risk
        })
        .product()
}

/// Global test recomputed with O(n) work per event. Assumes no tied event
/// times.
pub fn naive_test(records: &[SubjectRecord], beta: &[f64], kind: TransformKind) -> NaiveTest {
    let p = beta.len();
    let mut events: Vec<&SubjectRecord> = records.iter().filter(|r| r.status).collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let d = events.len();

    let mut resid = Vec::with_capacity(d);
    let mut vars = Vec::with_capacity(d);
    for e in &events {
        let mut s0 = 0.0;
        let mut s1 = DVector::zeros(p);
        let mut s2 = DMatrix::zeros(p, p);
        for r in records.iter().filter(|r| r.time >= e.time) {
            let x = DVector::from_column_slice(&r.covariates);
            let w = x.dot(&DVector::from_column_slice(beta)).exp();
            s0 += w;
            s1 += &x * w;
            s2 += &x * x.transpose() * w;
        }
        let mean = &s1 / s0;
        resid.push(DVector::from_column_slice(&e.covariates) - &mean);
        vars.push(&s2 / s0 - &mean * mean.transpose());
    }

    let raw: Vec<f64> = events
        .iter()
        .map(|e| match kind {
            TransformKind::Identity => e.time,
            TransformKind::Log => e.time.ln(),
            TransformKind::KaplanMeier => naive_km_before(records, e.time),
        })
        .collect();
    let gbar = raw.iter().sum::<f64>() / d as f64;
    let g: Vec<f64> = raw.iter().map(|v| v - gbar).collect();

    let mut q = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut gv = DMatrix::zeros(p, p);
    let mut ggv = DMatrix::zeros(p, p);
    let mut rsum = DVector::zeros(p);
    for l in 0..d {
        q += &resid[l] * g[l];
        rsum += &resid[l];
        info += &vars[l];
        gv += &vars[l] * g[l];
        ggv += &vars[l] * (g[l] * g[l]);
    }
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let h_simplified = &info * (g2 / d as f64);
    let h_exact = &ggv - &gv * info.clone().try_inverse().expect("invertible information") * gv.transpose();
    let quad = |h: &DMatrix<f64>| (q.transpose() * h.clone().try_inverse().expect("invertible H") * &q)[(0, 0)];
    NaiveTest {
        t_simplified: quad(&h_simplified),
        t_exact: quad(&h_exact),
        q,
        h_simplified,
        h_exact,
        g_centered: g,
        residual_sum: rsum,
    }
}

/// T = QᵀH⁻¹Q by LU inversion, for batch recomputation from summaries.
pub fn quad_form(q: &DVector<f64>, h: &DMatrix<f64>) -> f64 {
    (q.transpose() * h.clone().try_inverse().expect("invertible H") * q)[(0, 0)]
}

/// One-shot aggregated estimator (Σ I_k)⁻¹ Σ I_k β̂_k.
pub fn aee(fits: &[CoxFit]) -> DVector<f64> {
    let p = fits[0].beta_hat.len();
    let mut info = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for f in fits {
        info += &f.information;
        rhs += &f.information * &f.beta_hat;
    }
    info.try_inverse().expect("invertible") * rhs
}

/// Score-corrected recursion written out directly: returns β̃ after each
/// block.
pub fn hand_cuee(blocks: &[DataBlock], fits: &[CoxFit], ties: Ties) -> Vec<DVector<f64>> {
    let p = fits[0].beta_hat.len();
    let mut info_sum = DMatrix::<f64>::zeros(p, p);
    let mut s = DVector::<f64>::zeros(p);
    let mut xi = DVector::<f64>::zeros(p);
    let mut out = Vec::new();
    for (b, f) in blocks.iter().zip(fits) {
        let lhs = &info_sum + &f.information;
        let check = lhs.clone().try_inverse().unwrap() * (&s + &f.information * &f.beta_hat);
        let i_check = information(b, check.as_slice(), ties).unwrap();
        let u_check = score(b, check.as_slice(), ties).unwrap();
        info_sum += &i_check;
        s += &i_check * &check;
        xi += &u_check;
        out.push(info_sum.clone().try_inverse().unwrap() * (&s + &xi));
    }
    out
}

/// Sums the summaries recorded in `outcomes` and recomputes both statistics.
pub fn batch_from_summaries(outcomes: &[BlockOutcome], w: usize) -> (DMatrix<f64>, DVector<f64>, f64, f64) {
    let p = outcomes[0].cumulative_summary.q_blk.len();
    let mut h = DMatrix::zeros(p, p);
    let mut q = DVector::zeros(p);
    for o in outcomes {
        h += &o.cumulative_summary.h_blk;
        q += &o.cumulative_summary.q_blk;
    }
    let mut hw = DMatrix::zeros(p, p);
    let mut qw = DVector::zeros(p);
    for o in outcomes.iter().rev().take(w) {
        hw += &o.window_summary.h_blk;
        qw += &o.window_summary.q_blk;
    }
    let t = quad_form(&q, &h);
    let tw = quad_form(&qw, &hw);
    (h, q, t, tw)
}

/// Null-design blocks of a given size.
pub fn null_blocks(n: usize, k: usize, seed: u64) -> Vec<DataBlock> {
    let cfg = SimConfig { block_size: n, blocks: k, seed, ..Default::default() };
    (1..=k).map(|i| stream_block(&cfg, 0, i).unwrap()).collect()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0)).fold(0.0, f64::max)
}

/// The four-subject dataset with β̂ = ln((√17 − 1)/8).
pub fn d4() -> DataBlock {
    let rows = [(1.0, 0.0), (2.0, 1.0), (3.0, 0.0), (4.0, 1.0)];
    DataBlock::new(1, rows.iter().map(|&(t, x)| SubjectRecord::new(t, true, vec![x])).collect()).unwrap()
}
