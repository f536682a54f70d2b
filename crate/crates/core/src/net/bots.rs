use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{NodeId, Role};
use crate::sim::{Action, Command, SimState};
use crate::world::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BotPolicy {
    RandomWalk,
    GreedyCoverage,
    Courier,
    /// Stands still; used for abandoned characters when configured.
    Idle,
}

impl BotPolicy {
    pub fn name(self) -> &'static str {
        match self {
            BotPolicy::RandomWalk => "random_walk",
            BotPolicy::GreedyCoverage => "greedy_coverage",
            BotPolicy::Courier => "courier",
            BotPolicy::Idle => "idle",
        }
    }
}

impl fmt::Display for BotPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BotSpecError {
    #[error("unknown bot policy {0:?}")]
    UnknownPolicy(String),
    #[error("expected <policy>:<count>, got {0:?}")]
    BadFormat(String),
}

impl FromStr for BotPolicy {
    type Err = BotSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "random_walk" | "random" => Ok(BotPolicy::RandomWalk),
            "greedy_coverage" | "greedy" => Ok(BotPolicy::GreedyCoverage),
            "courier" => Ok(BotPolicy::Courier),
            "idle" => Ok(BotPolicy::Idle),
            _ => Err(BotSpecError::UnknownPolicy(s.to_owned())),
        }
    }
}

/// `count` bots running `policy`, written `policy:count` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotSpec {
    pub policy: BotPolicy,
    pub count: u32,
}

impl FromStr for BotSpec {
    type Err = BotSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (policy, count) = s.split_once(':').ok_or_else(|| BotSpecError::BadFormat(s.to_owned()))?;
        let count = count.trim().parse().map_err(|_| BotSpecError::BadFormat(s.to_owned()))?;
        Ok(BotSpec { policy: policy.trim().parse()?, count })
    }
}

impl fmt::Display for BotSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.policy, self.count)
    }
}

fn legal_moves(state: &SimState, node: NodeId) -> Vec<Direction> {
    let Some(n) = state.node(node) else { return Vec::new() };
    let world = state.world();
    Direction::ALL
        .into_iter()
        .filter(|d| world.neighbor(n.pos, *d, 1).is_some_and(|p| world.is_road(p)))
        .collect()
}

fn random_walk(state: &SimState, node: NodeId, rng: &mut impl Rng) -> Action {
    let moves = legal_moves(state, node);
    if moves.is_empty() {
        return Action::Idle;
    }
    Action::Move { dir: moves[rng.gen_range(0..moves.len())] }
}

fn greedy_coverage(state: &SimState, node: NodeId) -> Action {
    let Some(n) = state.node(node) else { return Action::Idle };
    let mut best: Option<(u32, Direction)> = None;
    for dir in legal_moves(state, node) {
        let pos = n.pos.step(dir, 1).expect("legal move stays on the map");
        let usable = state.connectivity_at(node, pos).map_or(0, |c| c.usable);
        if best.is_none_or(|(score, _)| usable > score) {
            best = Some((usable, dir));
        }
    }
    best.map_or(Action::Idle, |(_, dir)| Action::Move { dir })
}

fn courier(state: &SimState, node: NodeId) -> Option<Action> {
    let n = state.node(node)?;
    let block = *n.carried.first()?;
    if n.role() == Role::Full {
        return None;
    }
    let fulls: Vec<NodeId> = state
        .nodes()
        .iter()
        .filter(|m| m.active && m.id != node && m.role() == Role::Full)
        .map(|m| m.id)
        .collect();
    if let Some(&to) = fulls.iter().find(|m| state.link_between(node, **m).is_some()) {
        return Some(Action::Transfer { block, to });
    }
    let world = state.world();
    let dist = world.road_distances(n.pos);
    let target = fulls
        .iter()
        .filter_map(|m| {
            let pos = state.node(*m)?.pos;
            world.road_distance_at(&dist, pos).filter(|d| *d > 0).map(|d| (d, *m, pos))
        })
        .min()?;
    let path = world.road_path(n.pos, target.2).ok()??;
    let next = path[1];
    Direction::ALL.into_iter().find(|d| n.pos.step(*d, 1) == Some(next)).map(|dir| Action::Move { dir })
}

/// Chooses the next command for a bot-controlled node.
///
/// Except under [`BotPolicy::Idle`], a full node carrying a block while not
/// mining starts mining it first. Inactive nodes idle.
pub fn run_policy(policy: BotPolicy, state: &SimState, node: NodeId, rng: &mut impl Rng) -> Command {
    let action = match state.node(node) {
        None => Action::Idle,
        Some(n) if !n.active || policy == BotPolicy::Idle => Action::Idle,
        Some(n) if n.role() == Role::Full && n.job.is_none() && !n.carried.is_empty() => {
            Action::Mine { block: *n.carried.first().unwrap() }
        }
        Some(_) => match policy {
            BotPolicy::Idle => unreachable!(),
            BotPolicy::RandomWalk => random_walk(state, node, rng),
            BotPolicy::GreedyCoverage => greedy_coverage(state, node),
            BotPolicy::Courier => courier(state, node).unwrap_or_else(|| greedy_coverage(state, node)),
        },
    };
    Command::new(node, action)
}
