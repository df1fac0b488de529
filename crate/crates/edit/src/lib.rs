//! Human review of inferred road segments: an overlay of candidate edges that
//! a map editor accepts or rejects, prunes and tours, then exports merged into
//! the base map.

pub mod prune;
pub mod server;
pub mod session;
pub mod store;

use std::path::PathBuf;

use thiserror::Error;

pub use prune::PruneParams;
pub use session::{Action, Decision, LogEntry, OverlaySegment, SegmentId, Session, Status, TeleportView};

#[derive(Debug, Error)]
pub enum EditError {
    #[error("base and inferred graphs use different projections")]
    ProjectionMismatch,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown segment {0}")]
    UnknownSegment(SegmentId),
    #[error("cannot read {path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("session store: {0}")]
    Store(String),
}
