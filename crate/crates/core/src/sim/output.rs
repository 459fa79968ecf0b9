//! Plot-ready CSV tables.

use std::io::Write;

use super::experiments::{ExperimentOutput, QqSample, RejectionCurve};
use crate::error::{CoxError, Result};

fn csv_err(e: impl std::fmt::Display) -> CoxError {
    CoxError::InvalidInput(format!("csv output failed: {e}"))
}

/// One row per (replicate, k, version): statistic, p-value, rejection.
pub fn write_tidy_csv<W: Write>(out: &ExperimentOutput, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in out.tidy_rows() {
        wtr.serialize(row).map_err(csv_err)?;
    }
    wtr.flush().map_err(csv_err)
}

/// `k,version,rejection_rate,mc_se,n`
pub fn write_summary_csv<W: Write>(curve: &RejectionCurve, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k", "version", "rejection_rate", "mc_se", "n"]).map_err(csv_err)?;
    for (version, points) in [("cumulative", &curve.cumulative), ("window", &curve.window)] {
        for p in points {
            wtr.write_record([
                p.k.to_string(),
                version.to_string(),
                p.rate.to_string(),
                p.mc_se.to_string(),
                p.n.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(csv_err)
}

/// `k,replicate_rank,online,pooled` with both samples sorted, ready for a
/// quantile-quantile plot.
pub fn write_qq_csv<W: Write>(samples: &[QqSample], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k", "rank", "online", "pooled"]).map_err(csv_err)?;
    for s in samples {
        let mut a = s.online.clone();
        let mut b = s.pooled.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            wtr.write_record([s.k.to_string(), (i + 1).to_string(), x.to_string(), y.to_string()])
                .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(csv_err)
}
