//! Authoritative simulation state and the per-tick step.
//!
//! Each call to [`SimState::step`] advances exactly one tick and runs a
//! fixed phase order:
//!
//! 1. command validation and movement
//! 2. block generation on `N * tick_rate` boundaries
//! 3. transfers (link checks use post-movement positions)
//! 4. one mining step for every active job
//! 5. appends, in node-id order; jobs that lost the race are rebased
//! 6. expiry sweep
//! 7. energy accounting and deactivation
//!
//! Events are emitted in phase order and carry the new tick number.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{
    self, Block, BlockId, BlockStatus, Chain, Holder, MineOutcome, MiningJob, NodeId, Role, Target,
};
use crate::radio::{Connectivity, ConnectivityGraph, LinkVerdict, RadioContext, RadioEndpoint};
use crate::rng;
use crate::sim::command::{Action, Command, RejectReason, Verdict};
use crate::sim::event::{Event, EventKind};
use crate::sim::scenario::{speed_units, CharacterProfile, EnergyCosts, Scenario, ScoringWeights, TILE_CREDIT};
use crate::world::{generate_world, TileCoord, World, WorldError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("spawn tile {0} is not a road tile")]
    SpawnOffRoad(TileCoord),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: NodeId,
    /// Display name; unique per session.
    pub character: String,
    pub profile: CharacterProfile,
    pub pos: TileCoord,
    /// Micro-units.
    pub energy: i64,
    pub carried: BTreeSet<BlockId>,
    pub job: Option<MiningJob>,
    pub active: bool,
    pub move_credit: u64,
}

impl NodeState {
    pub fn role(&self) -> Role {
        self.profile.role
    }

    pub fn endpoint(&self) -> RadioEndpoint {
        RadioEndpoint {
            pos: self.pos,
            radios: self.profile.radios.clone(),
            penetration_bonus: self.profile.penetration_bonus,
        }
    }

    pub fn mining_block(&self) -> Option<BlockId> {
        self.job.as_ref().map(|j| j.block.id)
    }
}

impl Holder for NodeState {
    fn holds(&self, block: BlockId) -> bool {
        self.carried.contains(&block)
    }
}

/// A generated block that is neither chained nor expired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingBlock {
    pub block: Block,
    pub holder: NodeId,
    pub hops: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub block: BlockId,
    pub creator: NodeId,
    pub miner: NodeId,
    pub created_tick: u64,
    pub appended_tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub target: Target,
    pub interval_ticks: u64,
    pub expiry_ticks: u64,
    pub costs: EnergyCosts,
    pub weights: ScoringWeights,
}

impl SimConfig {
    pub fn from_scenario(s: &Scenario) -> Result<Self, SimError> {
        s.validate().map_err(|e| SimError::Scenario(e.to_string()))?;
        Ok(Self {
            target: s.target(),
            interval_ticks: s.interval_ticks(),
            expiry_ticks: s.expiry_ticks,
            costs: s.energy.costs().map_err(|e| SimError::Scenario(e.to_string()))?,
            weights: s.scoring,
        })
    }
}

/// What each node did during one tick, for energy accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Activity {
    pub tiles_moved: u64,
    pub jumps: u64,
    pub transfers: u64,
    pub hashes: u64,
}

/// Itemized energy spend for one node over one tick, in micro-units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnergyDelta {
    pub idle: i64,
    pub movement: i64,
    pub transmit: i64,
    pub hashing: i64,
}

impl EnergyDelta {
    pub fn total(&self) -> i64 {
        self.idle + self.movement + self.transmit + self.hashing
    }
}

/// A jump costs this many plain moves.
pub const JUMP_COST_FACTOR: i64 = 3;

/// Per-node itemized charge for one tick of activity.
pub fn account_energy(costs: &EnergyCosts, activity: &Activity) -> EnergyDelta {
    EnergyDelta {
        idle: costs.idle,
        movement: costs.movement * (activity.tiles_moved as i64 + JUMP_COST_FACTOR * activity.jumps as i64),
        transmit: costs.transmit * activity.transfers as i64,
        hashing: costs.hash * activity.hashes as i64,
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    tick: u64,
    radio: Arc<RadioContext>,
    config: SimConfig,
    nodes: Vec<NodeState>,
    pending: BTreeMap<BlockId, PendingBlock>,
    chain: Chain,
    validations: Vec<ValidationRecord>,
    rng: ChaCha8Rng,
    next_block_id: BlockId,
    next_seq: u64,
}

impl SimState {
    /// Generates the round's world from the scenario seed.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, SimError> {
        let world = generate_world(scenario.seed, &scenario.map)?;
        Self::new(scenario, world)
    }

    /// Starts a round on an explicit world. Station transmit powers are
    /// taken from the scenario's radio table.
    pub fn new(scenario: &Scenario, mut world: World) -> Result<Self, SimError> {
        let config = SimConfig::from_scenario(scenario)?;
        for station in world.stations_mut() {
            station.tx_power = scenario.radios.get(station.tech).tx_power;
        }
        let radio = RadioContext::new(Arc::new(world), scenario.env, scenario.radios);
        Ok(Self {
            tick: 0,
            radio: Arc::new(radio),
            config,
            nodes: Vec::new(),
            pending: BTreeMap::new(),
            chain: Chain::new(),
            validations: Vec::new(),
            rng: rng::stream(scenario.seed, rng::SIM_STREAM),
            next_block_id: 0,
            next_seq: 0,
        })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn world(&self) -> &World {
        self.radio.world()
    }

    pub fn radio(&self) -> &RadioContext {
        &self.radio
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeState> {
        self.nodes.get(id.0 as usize)
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn pending(&self) -> &BTreeMap<BlockId, PendingBlock> {
        &self.pending
    }

    pub fn validations(&self) -> &[ValidationRecord] {
        &self.validations
    }

    pub fn active_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.active).count()
    }

    pub fn all_inactive(&self) -> bool {
        !self.nodes.is_empty() && self.active_count() == 0
    }

    /// Adds a node on `pos` with full energy. Ids are dense and start at 0.
    pub fn spawn(&mut self, character: impl Into<String>, profile: CharacterProfile, pos: TileCoord) -> Result<NodeId, SimError> {
        if !self.world().is_road(pos) {
            return Err(SimError::SpawnOffRoad(pos));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(NodeState {
            id,
            character: character.into(),
            profile,
            pos,
            energy: self.config.costs.initial,
            carried: BTreeSet::new(),
            job: None,
            active: true,
            move_credit: 0,
        });
        Ok(id)
    }

    /// Connectivity gauge for one node against all other active nodes.
    pub fn connectivity(&self, id: NodeId) -> Option<Connectivity> {
        let node = self.node(id)?;
        self.connectivity_at(id, node.pos)
    }

    /// Connectivity the node would have if it stood on `pos`.
    pub fn connectivity_at(&self, id: NodeId, pos: TileCoord) -> Option<Connectivity> {
        let node = self.node(id)?;
        let mut me = node.endpoint();
        me.pos = pos;
        let peers: Vec<RadioEndpoint> = self
            .nodes
            .iter()
            .filter(|n| n.active && n.id != id)
            .map(NodeState::endpoint)
            .collect();
        self.radio.connectivity_score(&me, &peers).ok()
    }

    /// Usable links among active nodes; graph indices are positions in the
    /// returned id list.
    pub fn connectivity_graph(&self) -> (Vec<NodeId>, ConnectivityGraph) {
        let active: Vec<&NodeState> = self.nodes.iter().filter(|n| n.active).collect();
        let endpoints: Vec<RadioEndpoint> = active.iter().map(|n| n.endpoint()).collect();
        (active.iter().map(|n| n.id).collect(), self.radio.connectivity_graph(&endpoints))
    }

    /// The link a transfer between two nodes would use right now.
    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkVerdict> {
        let (a, b) = (self.node(a)?, self.node(b)?);
        if !a.active || !b.active || a.id == b.id {
            return None;
        }
        self.radio.first_usable_link(&a.endpoint(), &b.endpoint())
    }

    /// Checks a command against the current state. Movement credit is not
    /// part of legality: an accepted move simply waits for credit.
    pub fn validate_command(&self, cmd: &Command) -> Verdict {
        use RejectReason::*;
        let Some(node) = self.node(cmd.issuer) else {
            return Verdict::Rejected(UnknownNode);
        };
        if !node.active {
            return Verdict::Rejected(Inactive);
        }
        let world = self.world();
        match cmd.action {
            Action::Idle => Verdict::Accepted,
            Action::Move { dir } => match world.neighbor(node.pos, dir, 1) {
                Some(next) if world.is_road(next) => Verdict::Accepted,
                _ => Verdict::Rejected(IllegalMove),
            },
            Action::Jump { dir } => {
                let over = world.neighbor(node.pos, dir, 1);
                let landing = world.neighbor(node.pos, dir, 2);
                match (node.profile.can_jump, over, landing) {
                    (true, Some(over), Some(landing)) if !world.is_road(over) && world.is_road(landing) => {
                        Verdict::Accepted
                    }
                    _ => Verdict::Rejected(IllegalMove),
                }
            }
            Action::Transfer { block, to } => {
                if !node.holds(block) {
                    return Verdict::Rejected(NotHolder);
                }
                if self.node(to).is_none() {
                    return Verdict::Rejected(UnknownNode);
                }
                match self.link_between(node.id, to) {
                    Some(_) => Verdict::Accepted,
                    None => Verdict::Rejected(NoLink),
                }
            }
            Action::Mine { block } => {
                if !node.role().can_mine() {
                    Verdict::Rejected(RoleViolation)
                } else if !node.holds(block) {
                    Verdict::Rejected(NotHolder)
                } else {
                    Verdict::Accepted
                }
            }
        }
    }

    fn emit(&mut self, events: &mut Vec<Event>, kind: EventKind) {
        events.push(Event { tick: self.tick, seq: self.next_seq, kind });
        self.next_seq += 1;
    }

    fn reject(&mut self, events: &mut Vec<Event>, cmd: &Command, reason: RejectReason) {
        self.emit(events, EventKind::IllegalCommand { node: cmd.issuer, action: cmd.action, reason });
    }

    /// Drops the node's job, if any, and puts the block back to rest.
    fn cancel_job(&mut self, idx: usize, events: &mut Vec<Event>) {
        let Some(job) = self.nodes[idx].job.take() else {
            return;
        };
        if let Some(p) = self.pending.get_mut(&job.block.id) {
            p.block.status = if p.hops == 0 { BlockStatus::Generated } else { BlockStatus::InTransit };
        }
        self.emit(events, EventKind::MiningResult { block: job.block.id, miner: job.miner, found: false, nonce: None });
    }

    /// Advances one tick. Per-command failures become `IllegalCommand`
    /// events; the step itself never fails.
    pub fn step(&mut self, commands: &[Command]) -> Vec<Event> {
        self.tick += 1;
        let tick = self.tick;
        let mut events = Vec::new();
        let mut activity = vec![Activity::default(); self.nodes.len()];

        for node in self.nodes.iter_mut().filter(|n| n.active) {
            node.move_credit += speed_units(node.profile.move_speed);
        }

        // 1. validation and movement, in (issuer, receipt) order
        let mut ordered: Vec<&Command> = commands.iter().collect();
        ordered.sort_by_key(|c| c.issuer);
        let mut seen = BTreeSet::new();
        let mut transfers = Vec::new();
        for cmd in ordered {
            if !seen.insert(cmd.issuer) {
                self.reject(&mut events, cmd, RejectReason::DuplicateCommand);
                continue;
            }
            if matches!(cmd.action, Action::Transfer { .. }) {
                transfers.push(*cmd);
                continue;
            }
            if let Verdict::Rejected(reason) = self.validate_command(cmd) {
                self.reject(&mut events, cmd, reason);
                continue;
            }
            let idx = cmd.issuer.0 as usize;
            match cmd.action {
                Action::Move { dir } | Action::Jump { dir } => {
                    let node = &mut self.nodes[idx];
                    if node.move_credit < TILE_CREDIT {
                        continue;
                    }
                    node.move_credit -= TILE_CREDIT;
                    let jump = matches!(cmd.action, Action::Jump { .. });
                    let span = if jump { 2 } else { 1 };
                    node.pos = node.pos.step(dir, span).expect("validated move");
                    if jump {
                        activity[idx].jumps += 1;
                    } else {
                        activity[idx].tiles_moved += 1;
                    }
                }
                Action::Mine { block } => {
                    if self.nodes[idx].mining_block() == Some(block) {
                        continue;
                    }
                    self.cancel_job(idx, &mut events);
                    let node = &self.nodes[idx];
                    let pending = &self.pending[&block];
                    let mut job = MiningJob::new(pending.block.clone(), node.id, node.role())
                        .expect("validated full-node miner");
                    job.rebase(self.chain.head_hash());
                    let miner = node.id;
                    self.pending.get_mut(&block).unwrap().block.status = BlockStatus::Mining;
                    self.nodes[idx].job = Some(job);
                    self.emit(&mut events, EventKind::MiningStarted { block, miner });
                }
                Action::Idle | Action::Transfer { .. } => {}
            }
        }
        // at most one tile's worth of credit is banked across ticks
        for node in &mut self.nodes {
            node.move_credit = node.move_credit.min(TILE_CREDIT);
        }

        // 2. generation
        if tick.is_multiple_of(self.config.interval_ticks) {
            let active: Vec<NodeId> = self.nodes.iter().filter(|n| n.active).map(|n| n.id).collect();
            if let Ok((block, creator)) =
                chain::generate_block(&mut self.rng, self.next_block_id, tick, &active, self.chain.head_hash())
            {
                self.next_block_id += 1;
                let id = block.id;
                self.nodes[creator.0 as usize].carried.insert(id);
                self.pending.insert(id, PendingBlock { block, holder: creator, hops: 0 });
                self.emit(&mut events, EventKind::BlockGenerated { block: id, creator });
            }
        }

        // 3. transfers
        for cmd in transfers {
            let Action::Transfer { block, to } = cmd.action else { unreachable!() };
            if let Verdict::Rejected(reason) = self.validate_command(&cmd) {
                self.reject(&mut events, &cmd, reason);
                continue;
            }
            let from = cmd.issuer.0 as usize;
            let verdict = self.link_between(cmd.issuer, to).expect("validated link");
            let moved = chain::start_transfer(&self.pending[&block].block, &self.nodes[from], &verdict)
                .expect("validated transfer");
            if self.nodes[from].mining_block() == Some(block) {
                self.cancel_job(from, &mut events);
            }
            let p = self.pending.get_mut(&block).unwrap();
            p.block = moved;
            p.holder = to;
            p.hops += 1;
            self.nodes[from].carried.remove(&block);
            self.nodes[to.0 as usize].carried.insert(block);
            activity[from].transfers += 1;
            self.emit(
                &mut events,
                EventKind::TransferCompleted { block, from: cmd.issuer, to, tech: verdict.tech, margin: verdict.margin },
            );
        }

        // 4. mining
        let head = self.chain.head_hash();
        let mut found = Vec::new();
        for (idx, act) in activity.iter_mut().enumerate() {
            if !self.nodes[idx].active {
                continue;
            }
            let Some(job) = self.nodes[idx].job.as_mut() else { continue };
            job.rebase(head);
            let rate = self.nodes[idx].profile.mining_rate;
            let outcome = match chain::mine_step(self.nodes[idx].job.as_ref().unwrap(), rate, self.config.target) {
                Ok(o) => o,
                Err(_) => {
                    self.cancel_job(idx, &mut events);
                    continue;
                }
            };
            let attempts = outcome.attempts();
            act.hashes += attempts;
            let (block, miner) = (outcome.job().block.id, outcome.job().miner);
            self.emit(&mut events, EventKind::MiningAttempted { block, miner, attempts });
            match outcome {
                MineOutcome::InProgress { job, .. } => self.nodes[idx].job = Some(job),
                MineOutcome::Found { job, nonce, .. } => {
                    self.nodes[idx].job = Some(job);
                    self.emit(&mut events, EventKind::MiningResult { block, miner, found: true, nonce: Some(nonce) });
                    found.push(idx);
                }
            }
        }

        // 5. appends
        for idx in found {
            let job = self.nodes[idx].job.as_mut().expect("found job");
            let head = self.chain.head_hash();
            if job.block.prev_hash != head {
                // another block landed first this tick
                job.rebase(head);
                continue;
            }
            let candidate = job.block.clone();
            let miner = job.miner;
            let Ok(hash) = self.chain.append(candidate.clone(), self.config.target) else {
                self.cancel_job(idx, &mut events);
                continue;
            };
            self.nodes[idx].job = None;
            self.nodes[idx].carried.remove(&candidate.id);
            self.pending.remove(&candidate.id);
            self.validations.push(ValidationRecord {
                block: candidate.id,
                creator: candidate.creator,
                miner,
                created_tick: candidate.created_tick,
                appended_tick: tick,
            });
            self.emit(
                &mut events,
                EventKind::BlockAppended {
                    block: candidate.id,
                    creator: candidate.creator,
                    miner,
                    created_tick: candidate.created_tick,
                    height: self.chain.len() as u64,
                    header: hex::encode(candidate.encode_header()),
                    hash: hex::encode(hash),
                },
            );
        }

        // 6. expiry
        let expired: Vec<BlockId> = self
            .pending
            .values()
            .filter(|p| tick.saturating_sub(p.block.created_tick) >= self.config.expiry_ticks)
            .map(|p| p.block.id)
            .collect();
        for id in expired {
            let holder = self.pending[&id].holder;
            let idx = holder.0 as usize;
            if self.nodes[idx].mining_block() == Some(id) {
                self.cancel_job(idx, &mut events);
            }
            self.nodes[idx].carried.remove(&id);
            self.pending.remove(&id);
            self.emit(&mut events, EventKind::BlockExpired { block: id, holder });
        }

        // 7. energy
        for (idx, act) in activity.iter().enumerate() {
            if !self.nodes[idx].active {
                continue;
            }
            let delta = account_energy(&self.config.costs, act);
            let applied = delta.total().min(self.nodes[idx].energy);
            self.nodes[idx].energy -= applied;
            let node = self.nodes[idx].id;
            if delta.total() > 0 {
                self.emit(
                    &mut events,
                    EventKind::EnergyCharged {
                        node,
                        idle: delta.idle,
                        movement: delta.movement,
                        transmit: delta.transmit,
                        hashing: delta.hashing,
                        applied,
                    },
                );
            }
            if self.nodes[idx].energy == 0 {
                self.cancel_job(idx, &mut events);
                self.nodes[idx].active = false;
                self.emit(&mut events, EventKind::EnergyDepleted { node });
            }
        }

        debug_assert_eq!(self.audit(), Ok(()));
        events
    }

    /// Pure form of [`SimState::step`].
    pub fn stepped(&self, commands: &[Command]) -> (SimState, Vec<Event>) {
        let mut next = self.clone();
        let events = next.step(commands);
        (next, events)
    }

    /// Block conservation and node invariants. Every pending block is held
    /// by exactly one node, nothing else is held, chained blocks are never
    /// pending, and every node stands on a road.
    pub fn audit(&self) -> Result<(), String> {
        let mut holders: BTreeMap<BlockId, Vec<NodeId>> = BTreeMap::new();
        for node in &self.nodes {
            if !self.world().is_road(node.pos) {
                return Err(format!("node {} off-road at {}", node.id, node.pos));
            }
            if node.active != (node.energy > 0) {
                return Err(format!("node {} active flag disagrees with energy", node.id));
            }
            if let Some(job) = &node.job {
                if !node.role().can_mine() || job.miner != node.id || !node.holds(job.block.id) {
                    return Err(format!("node {} has an invalid job", node.id));
                }
            }
            for b in &node.carried {
                holders.entry(*b).or_default().push(node.id);
            }
        }
        for (id, p) in &self.pending {
            match holders.remove(id).as_deref() {
                Some([one]) if *one == p.holder => {}
                other => return Err(format!("block {id} held by {other:?}, recorded holder {}", p.holder)),
            }
            if self.chain.contains(*id) {
                return Err(format!("block {id} is both pending and chained"));
            }
        }
        if let Some((id, who)) = holders.into_iter().next() {
            return Err(format!("block {id} carried by {who:?} but not pending"));
        }
        if !self.chain.verify(self.config.target) {
            return Err("chain failed verification".into());
        }
        Ok(())
    }
}
