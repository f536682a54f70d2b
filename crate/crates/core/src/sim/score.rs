use serde::{Deserialize, Serialize};

use crate::chain::{NodeId, Role};
use crate::sim::scenario::TICK_RATE;
use crate::sim::state::SimState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub node: NodeId,
    pub character: String,
    pub role: Role,
    pub blocks_created_validated: u64,
    pub blocks_mined: u64,
    pub points: u64,
    /// Micro-units.
    pub energy_remaining: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoreboard {
    pub tick: u64,
    pub chain_length: u64,
    pub nodes: Vec<NodeScore>,
    pub validated_per_minute: f64,
    /// Mean of `append tick - creation tick` over chained blocks, in ticks.
    pub mean_time_to_validation: f64,
}

impl Scoreboard {
    /// Node ids ordered by points, best first; ties go to the lower id.
    pub fn ranking(&self) -> Vec<NodeId> {
        let mut rows: Vec<&NodeScore> = self.nodes.iter().collect();
        rows.sort_by(|a, b| b.points.cmp(&a.points).then(a.node.cmp(&b.node)));
        rows.into_iter().map(|r| r.node).collect()
    }
}

pub fn validated_per_minute(validated: u64, ticks: u64) -> f64 {
    if ticks == 0 {
        return 0.0;
    }
    validated as f64 * (60 * TICK_RATE as u64) as f64 / ticks as f64
}

pub fn score(state: &SimState) -> Scoreboard {
    let weights = state.config().weights;
    let mut nodes: Vec<NodeScore> = state
        .nodes()
        .iter()
        .map(|n| NodeScore {
            node: n.id,
            character: n.character.clone(),
            role: n.role(),
            blocks_created_validated: 0,
            blocks_mined: 0,
            points: 0,
            energy_remaining: n.energy,
        })
        .collect();
    let mut gap_sum = 0u64;
    for v in state.validations() {
        nodes[v.creator.0 as usize].blocks_created_validated += 1;
        nodes[v.miner.0 as usize].blocks_mined += 1;
        gap_sum += v.appended_tick - v.created_tick;
    }
    for n in &mut nodes {
        n.points = weights.create as u64 * n.blocks_created_validated + weights.mine as u64 * n.blocks_mined;
    }
    let validated = state.validations().len() as u64;
    Scoreboard {
        tick: state.tick(),
        chain_length: state.chain().len() as u64,
        nodes,
        validated_per_minute: validated_per_minute(validated, state.tick()),
        mean_time_to_validation: if validated == 0 { 0.0 } else { gap_sum as f64 / validated as f64 },
    }
}
