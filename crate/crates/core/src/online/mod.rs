//! Constant-memory stream state: per-block summaries, the cumulative and
//! window statistics, and the running coefficient estimators.

mod serde_mat;
mod snapshot;
mod state;
mod summary;

pub use snapshot::{Snapshot, SNAPSHOT_FORMAT, SNAPSHOT_VERSION};
pub use state::{BlockOutcome, Estimate, EvalPoint, OnlineState, StreamConfig};
pub use summary::{block_summary, BlockSummary};
