//! Wire messages. Every message is one JSON text frame carrying `"v": 1`.
//!
//! Clients send [`ClientMessage`]; the server answers each with an `ack` or
//! `reject`, sends the static world once on `joined`, then a full
//! [`ServerSnapshot`] after every tick.

use serde::{Deserialize, Serialize};

use crate::chain::{BlockId, NodeId, Role};
use crate::radio::{PropagationEnv, RadioTable};
use crate::sim::{Action, Event, SimState};
use crate::world::{BaseStation, Geography, TileCoord, World};

pub const PROTOCOL_VERSION: u32 = 1;

/// Events kept in each snapshot's `recent_events`.
pub const RECENT_EVENTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMessage {
    pub v: u32,
    /// Per-client counter; must be exactly one more than the last accepted.
    pub seq: u64,
    #[serde(flatten)]
    pub body: ClientBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientBody {
    Join { player: String, character: String },
    /// The issuer is always the client's own node.
    Input { command: Action },
    Leave,
}

impl ClientMessage {
    pub fn new(seq: u64, body: ClientBody) -> Self {
        Self { v: PROTOCOL_VERSION, seq, body }
    }

    pub fn join(seq: u64, player: impl Into<String>, character: impl Into<String>) -> Self {
        Self::new(seq, ClientBody::Join { player: player.into(), character: character.into() })
    }

    pub fn input(seq: u64, command: Action) -> Self {
        Self::new(seq, ClientBody::Input { command })
    }

    pub fn leave(seq: u64) -> Self {
        Self::new(seq, ClientBody::Leave)
    }
}

/// Reasons a client message is refused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum SessionError {
    #[error("character {character} is already controlled")]
    CharacterTaken { character: String },
    #[error("no character named {character}")]
    UnknownCharacter { character: String },
    #[error("expected sequence {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("session is full")]
    SessionFull,
    #[error("join first")]
    NotJoined,
    #[error("already joined")]
    AlreadyJoined,
    #[error("unsupported protocol version {got}")]
    UnsupportedVersion { got: u32 },
    #[error("malformed message: {message}")]
    Malformed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldView {
    pub width: u32,
    pub height: u32,
    pub geography: Geography,
    /// One string per row, north first; base stations drawn over tiles.
    pub rows: Vec<String>,
    pub stations: Vec<BaseStation>,
    pub env: PropagationEnv,
    pub radios: RadioTable,
}

impl WorldView {
    pub fn new(world: &World, env: PropagationEnv, radios: RadioTable) -> Self {
        Self {
            width: world.width(),
            height: world.height(),
            geography: world.geography(),
            rows: world.to_ascii().lines().map(str::to_owned).collect(),
            stations: world.stations().to_vec(),
            env,
            radios,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePublic {
    pub id: NodeId,
    pub character: String,
    pub role: Role,
    pub pos: TileCoord,
    pub energy: i64,
    pub active: bool,
    pub connectivity_score: f64,
    pub carried_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub length: u64,
    /// First 8 hex digits of the head hash.
    pub head_hash_prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobProgress {
    pub block: BlockId,
    pub attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateView {
    pub node: NodeId,
    pub carried: Vec<BlockId>,
    pub job: Option<JobProgress>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerSnapshot {
    pub tick: u64,
    pub nodes: Vec<NodePublic>,
    pub chain: ChainSummary,
    pub recent_events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private: Option<PrivateView>,
}

impl ServerSnapshot {
    /// Public part only; see [`ServerSnapshot::with_private`].
    pub fn public(state: &SimState, recent: impl IntoIterator<Item = Event>) -> Self {
        let nodes = state
            .nodes()
            .iter()
            .map(|n| NodePublic {
                id: n.id,
                character: n.character.clone(),
                role: n.role(),
                pos: n.pos,
                energy: n.energy,
                active: n.active,
                connectivity_score: state.connectivity(n.id).map_or(0.0, |c| c.fraction()),
                carried_count: n.carried.len(),
            })
            .collect();
        Self {
            tick: state.tick(),
            nodes,
            chain: ChainSummary {
                length: state.chain().len() as u64,
                head_hash_prefix: hex::encode(&state.chain().head_hash()[..4]),
            },
            recent_events: recent.into_iter().collect(),
            private: None,
        }
    }

    pub fn with_private(mut self, state: &SimState, node: NodeId) -> Self {
        self.private = state.node(node).map(|n| PrivateView {
            node,
            carried: n.carried.iter().copied().collect(),
            job: n.job.as_ref().map(|j| JobProgress { block: j.block.id, attempts: j.attempts_done }),
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerBody {
    Ack { seq: u64 },
    /// `seq` is absent when the frame could not be parsed.
    Reject {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seq: Option<u64>,
        error: SessionError,
    },
    Joined { seq: u64, node: NodeId, world: WorldView },
    Snapshot(ServerSnapshot),
    End { tick: u64, reason: EndReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerMessage {
    pub v: u32,
    #[serde(flatten)]
    pub body: ServerBody,
}

impl ServerMessage {
    pub fn new(body: ServerBody) -> Self {
        Self { v: PROTOCOL_VERSION, body }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    MaxTicks,
    AllInactive,
    Stopped,
}

/// Parses a client frame, mapping every failure to [`SessionError`].
pub fn parse_client(text: &str) -> Result<ClientMessage, SessionError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| SessionError::Malformed { message: e.to_string() })?;
    match value.get("v").and_then(|v| v.as_u64()) {
        Some(v) if v == PROTOCOL_VERSION as u64 => {}
        Some(v) => return Err(SessionError::UnsupportedVersion { got: v as u32 }),
        None => return Err(SessionError::Malformed { message: "missing protocol version \"v\"".into() }),
    }
    serde_json::from_value(value).map_err(|e| SessionError::Malformed { message: e.to_string() })
}
