//! Per-block output records.
//!
//! Every record carries the same fields in the same order. Missing values
//! are written as `null` (JSON) or `NA` (CSV), never omitted. Floats use
//! 17 significant digits so that parsing them back is exact.

use std::io::Write;

use coxstream::online::BlockOutcome;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockRecord {
    pub k: usize,
    pub n_k: Option<usize>,
    pub d_k: Option<usize>,
    pub t_cum: Option<f64>,
    pub p_cum: Option<f64>,
    pub t_win: Option<f64>,
    pub p_win: Option<f64>,
    pub beta_cee: Option<Vec<f64>>,
    pub beta_cuee: Option<Vec<f64>>,
    pub se_cuee: Option<Vec<f64>>,
    pub flags: Vec<&'static str>,
    pub error: Option<String>,
}

impl BlockRecord {
    pub fn from_outcome(out: &BlockOutcome, alpha: f64) -> Self {
        let mut flags = Vec::new();
        if out.cumulative.rejects(alpha) {
            flags.push("reject_cum");
        }
        if out.window.rejects(alpha) {
            flags.push("reject_win");
        }
        if matches!(out.window.version, coxstream::TestVersion::Window { partial: true, .. }) {
            flags.push("window_partial");
        }
        if out.cumulative.rank_deficient {
            flags.push("rank_deficient_cum");
        }
        if out.window.rank_deficient {
            flags.push("rank_deficient_win");
        }
        if out.cumulative_summary.info_singular || out.window_summary.info_singular {
            flags.push("info_singular");
        }
        Self {
            k: out.k,
            n_k: Some(out.n_k),
            d_k: Some(out.d_k),
            t_cum: Some(out.cumulative.statistic),
            p_cum: Some(out.cumulative.p_value),
            t_win: Some(out.window.statistic),
            p_win: Some(out.window.p_value),
            beta_cee: Some(out.cee.beta.iter().copied().collect()),
            beta_cuee: Some(out.cuee.beta.iter().copied().collect()),
            se_cuee: Some(out.cuee.standard_errors().iter().copied().collect()),
            flags,
            error: None,
        }
    }

    pub fn failed(k: usize, n_k: Option<usize>, d_k: Option<usize>, error: String) -> Self {
        Self { k, n_k, d_k, flags: vec!["error"], error: Some(error), ..Default::default() }
    }

    pub fn to_json(&self) -> String {
        let num = |v: Option<f64>| v.filter(|x| x.is_finite()).map_or("null".to_string(), fmt_f64);
        let int = |v: Option<usize>| v.map_or("null".to_string(), |x| x.to_string());
        let arr = |v: &Option<Vec<f64>>| match v {
            None => "null".to_string(),
            Some(xs) => format!("[{}]", xs.iter().map(|&x| num(Some(x))).collect::<Vec<_>>().join(",")),
        };
        let flags = self.flags.iter().map(|f| format!("\"{f}\"")).collect::<Vec<_>>().join(",");
        let error = self.error.as_ref().map_or("null".to_string(), |e| serde_json::to_string(e).expect("string"));
        format!(
            "{{\"k\":{},\"n_k\":{},\"d_k\":{},\"T_cum\":{},\"p_cum\":{},\"T_win\":{},\"p_win\":{},\
             \"beta_cee\":{},\"beta_cuee\":{},\"se_cuee\":{},\"flags\":[{}],\"error\":{}}}",
            self.k,
            int(self.n_k),
            int(self.d_k),
            num(self.t_cum),
            num(self.p_cum),
            num(self.t_win),
            num(self.p_win),
            arr(&self.beta_cee),
            arr(&self.beta_cuee),
            arr(&self.se_cuee),
            flags,
            error
        )
    }

    pub fn csv_header(p: usize) -> Vec<String> {
        let mut h: Vec<String> =
            ["k", "n_k", "d_k", "T_cum", "p_cum", "T_win", "p_win"].iter().map(|s| s.to_string()).collect();
        for name in ["beta_cee", "beta_cuee", "se_cuee"] {
            h.extend((1..=p).map(|j| format!("{name}_{j}")));
        }
        h.push("flags".into());
        h.push("error".into());
        h
    }

    pub fn csv_row(&self, p: usize) -> Vec<String> {
        let na = || "NA".to_string();
        let num = |v: Option<f64>| v.filter(|x| x.is_finite()).map_or_else(na, fmt_f64);
        let int = |v: Option<usize>| v.map_or_else(na, |x| x.to_string());
        let mut row = vec![
            self.k.to_string(),
            int(self.n_k),
            int(self.d_k),
            num(self.t_cum),
            num(self.p_cum),
            num(self.t_win),
            num(self.p_win),
        ];
        for v in [&self.beta_cee, &self.beta_cuee, &self.se_cuee] {
            match v {
                Some(xs) => row.extend(xs.iter().map(|&x| num(Some(x)))),
                None => row.extend((0..p).map(|_| na())),
            }
        }
        row.push(self.flags.join(";"));
        row.push(self.error.clone().unwrap_or_else(na));
        row
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes records as JSON lines or CSV.
pub enum RecordSink<W: Write> {
    Jsonl(W),
    Csv { writer: csv::Writer<W>, header_written: bool },
}

impl<W: Write> RecordSink<W> {
    pub fn new(w: W, csv: bool) -> Self {
        if csv {
            Self::Csv { writer: csv::Writer::from_writer(w), header_written: false }
        } else {
            Self::Jsonl(w)
        }
    }

    /// `p` fixes the CSV column count; it is unknown only when no block
    /// has ever been read successfully.
    pub fn write(&mut self, rec: &BlockRecord, p: usize) -> anyhow::Result<()> {
        match self {
            Self::Jsonl(w) => {
                writeln!(w, "{}", rec.to_json())?;
                w.flush()?;
            }
            Self::Csv { writer, header_written } => {
                if !*header_written {
                    writer.write_record(BlockRecord::csv_header(p))?;
                    *header_written = true;
                }
                writer.write_record(rec.csv_row(p))?;
                writer.flush()?;
            }
        }
        Ok(())
    }
}
