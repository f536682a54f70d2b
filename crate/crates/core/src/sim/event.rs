//! The typed activity log.
//!
//! Four kinds correspond to what the chain view shows a player: block
//! generation ([`EventKind::BlockGenerated`]), attempt of validation
//! ([`EventKind::MiningAttempted`]), result of validation
//! ([`EventKind::MiningResult`]) and addition to the chain
//! ([`EventKind::BlockAppended`]).

use serde::{Deserialize, Serialize};

use crate::chain::{BlockId, NodeId};
use crate::radio::TechId;
use crate::sim::command::{Action, RejectReason};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    /// Run-wide sequence number; `(tick, seq)` totally orders the log.
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    BlockGenerated {
        block: BlockId,
        creator: NodeId,
    },
    /// Carries the link check that admitted the hand-off.
    TransferCompleted {
        block: BlockId,
        from: NodeId,
        to: NodeId,
        tech: TechId,
        margin: f64,
    },
    MiningStarted {
        block: BlockId,
        miner: NodeId,
    },
    MiningAttempted {
        block: BlockId,
        miner: NodeId,
        attempts: u64,
    },
    MiningResult {
        block: BlockId,
        miner: NodeId,
        found: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nonce: Option<u64>,
    },
    /// `header` is the 96-byte canonical encoding, hex; `hash` its SHA-256.
    BlockAppended {
        block: BlockId,
        creator: NodeId,
        miner: NodeId,
        created_tick: u64,
        height: u64,
        header: String,
        hash: String,
    },
    BlockExpired {
        block: BlockId,
        holder: NodeId,
    },
    /// Itemized energy spend for one node in micro-units. `applied` is
    /// what actually left the battery after flooring at zero.
    EnergyCharged {
        node: NodeId,
        idle: i64,
        movement: i64,
        transmit: i64,
        hashing: i64,
        applied: i64,
    },
    EnergyDepleted {
        node: NodeId,
    },
    IllegalCommand {
        node: NodeId,
        action: Action,
        reason: RejectReason,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::BlockGenerated { .. } => "block_generated",
            EventKind::TransferCompleted { .. } => "transfer_completed",
            EventKind::MiningStarted { .. } => "mining_started",
            EventKind::MiningAttempted { .. } => "mining_attempted",
            EventKind::MiningResult { .. } => "mining_result",
            EventKind::BlockAppended { .. } => "block_appended",
            EventKind::BlockExpired { .. } => "block_expired",
            EventKind::EnergyCharged { .. } => "energy_charged",
            EventKind::EnergyDepleted { .. } => "energy_depleted",
            EventKind::IllegalCommand { .. } => "illegal_command",
        }
    }

    /// Miner recorded by mining events, if any.
    pub fn miner(&self) -> Option<NodeId> {
        match self {
            EventKind::MiningStarted { miner, .. }
            | EventKind::MiningAttempted { miner, .. }
            | EventKind::MiningResult { miner, .. }
            | EventKind::BlockAppended { miner, .. } => Some(*miner),
            _ => None,
        }
    }
}
