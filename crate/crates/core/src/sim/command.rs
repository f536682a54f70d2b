use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chain::{BlockId, NodeId};
use crate::world::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Command {
    pub issuer: NodeId,
    #[serde(flatten)]
    pub action: Action,
}

impl Command {
    pub fn new(issuer: NodeId, action: Action) -> Self {
        Self { issuer, action }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Move { dir: Direction },
    /// Hop over one non-road tile onto the road two tiles away.
    Jump { dir: Direction },
    Transfer { block: BlockId, to: NodeId },
    Mine { block: BlockId },
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    IllegalMove,
    NoLink,
    RoleViolation,
    NotHolder,
    Inactive,
    DuplicateCommand,
    UnknownNode,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::IllegalMove => "illegal move",
            RejectReason::NoLink => "no usable link",
            RejectReason::RoleViolation => "only full nodes may mine",
            RejectReason::NotHolder => "block not held",
            RejectReason::Inactive => "node is out of energy",
            RejectReason::DuplicateCommand => "one command per node per tick",
            RejectReason::UnknownNode => "unknown node",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected(RejectReason),
}

impl Verdict {
    pub fn is_accepted(self) -> bool {
        self == Verdict::Accepted
    }
}
