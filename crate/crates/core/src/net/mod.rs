//! Multiplayer sessions, bots, replay logs and metrics.

pub mod bots;
pub mod metrics;
pub mod protocol;
pub mod replay;
pub mod server;
pub mod session;

use thiserror::Error;

pub use bots::{run_policy, BotPolicy, BotSpec};
pub use metrics::{export_metrics, MetricsReport};
pub use protocol::{ClientMessage, EndReason, ServerMessage, ServerSnapshot, SessionError};
pub use replay::{replay_verify, ReplayWriter, VerifyOutcome};
pub use server::{Server, ServerConfig};
pub use session::{run_session, Mode, RunSummary, Session, SessionConfig};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("cannot listen on {addr}: {source}")]
    PortUnavailable { addr: String, source: std::io::Error },
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error("malformed replay log at line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
