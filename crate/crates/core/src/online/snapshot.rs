//! Checkpoint files.
//!
//! A snapshot is a single JSON object:
//!
//! ```text
//! {
//!   "format": "coxstream-state",
//!   "version": 1,
//!   "config": { ...StreamConfig... },
//!   "state": {
//!     "p": 3, "w": 5, "k": 12,
//!     "h_cum": {"rows": 3, "cols": 3, "data": [row-major ...]},
//!     "q_cum": [..], "cee_info": {..}, "cee_beta": [..],
//!     "cuee_info": {..}, "cuee_s": [..], "cuee_xi": [..], "cuee_beta": [..],
//!     "window": [ {BlockSummary}, ... oldest first ]
//!   }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so a save/load cycle is bit-exact.

use serde::{Deserialize, Serialize};

use super::state::{OnlineState, StreamConfig};
use crate::error::{CoxError, Result};

pub const SNAPSHOT_FORMAT: &str = "coxstream-state";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format: String,
    pub version: u32,
    pub config: StreamConfig,
    pub state: OnlineState,
}

impl Snapshot {
    pub fn new(config: StreamConfig, state: OnlineState) -> Self {
        Self { format: SNAPSHOT_FORMAT.to_string(), version: SNAPSHOT_VERSION, config, state }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| CoxError::Checkpoint(e.to_string()))
    }

    /// Parses a snapshot, refusing unknown formats and versions.
    pub fn from_json(s: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(s).map_err(|e| CoxError::Checkpoint(e.to_string()))?;
        let format = raw.get("format").and_then(|v| v.as_str()).unwrap_or_default();
        if format != SNAPSHOT_FORMAT {
            return Err(CoxError::Checkpoint(format!("unrecognized snapshot format '{format}'")));
        }
        let version = raw.get("version").and_then(|v| v.as_u64());
        if version != Some(SNAPSHOT_VERSION as u64) {
            return Err(CoxError::Checkpoint(format!(
                "snapshot version {version:?} does not match supported version {SNAPSHOT_VERSION}"
            )));
        }
        let snap: Snapshot = serde_json::from_str(s).map_err(|e| CoxError::Checkpoint(e.to_string()))?;
        let st = &snap.state;
        let p = st.p;
        let dims_ok = st.h_cum.shape() == (p, p)
            && st.cee_info.shape() == (p, p)
            && st.cuee_info.shape() == (p, p)
            && [&st.q_cum, &st.cee_beta, &st.cuee_s, &st.cuee_xi, &st.cuee_beta].iter().all(|v| v.len() == p)
            && st.window.len() <= st.w
            && st.window.iter().all(|s| s.h_blk.shape() == (p, p) && s.q_blk.len() == p);
        if !dims_ok {
            return Err(CoxError::Checkpoint("snapshot dimensions are inconsistent".into()));
        }
        Ok(snap)
    }
}
