use serde::{Deserialize, Serialize};

use crate::error::{CoxError, Result};

/// One right-censored observation with time-fixed covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub time: f64,
    /// `true` when the event was observed, `false` when censored.
    pub status: bool,
    pub covariates: Vec<f64>,
}

impl SubjectRecord {
    pub fn new(time: f64, status: bool, covariates: Vec<f64>) -> Self {
        Self { time, status, covariates }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.time.is_finite() {
            return Err(CoxError::InvalidInput(format!("non-finite time {}", self.time)));
        }
        if self.time <= 0.0 {
            return Err(CoxError::InvalidInput(format!("time must be positive, got {}", self.time)));
        }
        if let Some(x) = self.covariates.iter().find(|x| !x.is_finite()) {
            return Err(CoxError::InvalidInput(format!("non-finite covariate {x}")));
        }
        Ok(())
    }
}

/// A block of subjects arriving together as one unit of the stream.
///
/// Records are sorted by time on construction and stored column-wise.
/// Every block holds at least one event.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    k: usize,
    p: usize,
    time: Vec<f64>,
    status: Vec<bool>,
    /// Row-major n×p.
    x: Vec<f64>,
    /// Column means, used to center covariates before exponentiation.
    center: Vec<f64>,
    /// `x` minus `center`, row-major.
    centered: Vec<f64>,
    events: usize,
}

impl DataBlock {
    pub fn new(k: usize, records: Vec<SubjectRecord>) -> Result<Self> {
        let p = records
            .first()
            .map(|r| r.covariates.len())
            .ok_or_else(|| CoxError::InvalidInput("block has no records".into()))?;
        if p == 0 {
            return Err(CoxError::InvalidInput("covariate dimension must be at least 1".into()));
        }
        for r in &records {
            if r.covariates.len() != p {
                return Err(CoxError::DimensionMismatch { expected: p, found: r.covariates.len() });
            }
            r.validate()?;
        }
        let events = records.iter().filter(|r| r.status).count();
        if events == 0 {
            return Err(CoxError::DegenerateBlock { k });
        }

        let mut order: Vec<usize> = (0..records.len()).collect();
        order.sort_by(|&a, &b| records[a].time.total_cmp(&records[b].time));

        let n = records.len();
        let mut time = Vec::with_capacity(n);
        let mut status = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n * p);
        let mut center = vec![0.0; p];
        for &i in &order {
            let r = &records[i];
            time.push(r.time);
            status.push(r.status);
            x.extend_from_slice(&r.covariates);
            for (c, v) in center.iter_mut().zip(&r.covariates) {
                *c += v;
            }
        }
        for c in &mut center {
            *c /= n as f64;
        }
        let centered = x.chunks(p).flat_map(|row| row.iter().zip(&center).map(|(v, c)| v - c)).collect();
        Ok(Self { k, p, time, status, x, center, centered, events })
    }

    /// Concatenates blocks into one dataset (e.g. the pooled data up to block k).
    pub fn pooled<'a, I>(k: usize, blocks: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a DataBlock>,
    {
        let records = blocks.into_iter().flat_map(|b| b.records()).collect();
        Self::new(k, records)
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn with_index(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.events
    }

    /// Times in ascending order.
    pub fn times(&self) -> &[f64] {
        &self.time
    }

    pub fn statuses(&self) -> &[bool] {
        &self.status
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub(crate) fn center(&self) -> &[f64] {
        &self.center
    }

    pub(crate) fn centered_covariates(&self) -> &[f64] {
        &self.centered
    }

    pub fn record(&self, i: usize) -> SubjectRecord {
        SubjectRecord::new(self.time[i], self.status[i], self.covariates(i).to_vec())
    }

    /// Records in ascending time order.
    pub fn records(&self) -> impl Iterator<Item = SubjectRecord> + '_ {
        (0..self.len()).map(|i| self.record(i))
    }

    /// Event times in ascending order, repeated for tied events.
    pub fn event_times(&self) -> Vec<f64> {
        self.time
            .iter()
            .zip(&self.status)
            .filter(|(_, &s)| s)
            .map(|(&t, _)| t)
            .collect()
    }
}
