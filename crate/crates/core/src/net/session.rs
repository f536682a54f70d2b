use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::NodeId;
use crate::net::bots::{run_policy, BotPolicy, BotSpec};
use crate::net::protocol::{
    ClientBody, ClientMessage, EndReason, ServerSnapshot, SessionError, WorldView, PROTOCOL_VERSION, RECENT_EVENTS,
};
use crate::net::replay::{EndRecord, ReplayHeader, ReplayWriter, SpawnRecord, TickRecord};
use crate::net::NetError;
use crate::rng;
use crate::sim::{Action, Command, Event, Scenario, SimState};
use crate::world::TileCoord;

pub type ClientId = u64;

/// Nodes a session will hold, bots included.
pub const MAX_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One tick per 100 ms of wall-clock time.
    Realtime,
    /// As fast as possible.
    Turbo,
}

impl Mode {
    pub fn tick_period(self) -> Option<Duration> {
        match self {
            Mode::Realtime => Some(Duration::from_millis(1000 / crate::sim::TICK_RATE as u64)),
            Mode::Turbo => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub bots: Vec<BotSpec>,
    /// Policy that takes over a character whose player left.
    pub leave_policy: BotPolicy,
    pub max_nodes: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { bots: Vec::new(), leave_policy: BotPolicy::RandomWalk, max_nodes: MAX_NODES }
    }
}

impl SessionConfig {
    pub fn with_bots(bots: impl IntoIterator<Item = BotSpec>) -> Self {
        Self { bots: bots.into_iter().collect(), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Controller {
    Player(ClientId),
    Bot(BotPolicy),
}

#[derive(Debug, Clone)]
struct Seat {
    controller: Controller,
    /// Spawned for a player who has since left.
    claimable: bool,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Default)]
struct ClientEntry {
    last_seq: u64,
    node: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ack {
    Joined(NodeId),
    Accepted,
}

/// One tick's recorded inputs and resulting events.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub record: TickRecord,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ticks: u64,
    pub reason: EndReason,
    pub chain_length: u64,
}

/// Authoritative multiplayer round: the sim plus who controls each node.
#[derive(Debug, Clone)]
pub struct Session {
    scenario: Scenario,
    config: SessionConfig,
    state: SimState,
    seats: Vec<Seat>,
    clients: BTreeMap<ClientId, ClientEntry>,
    queue: BTreeMap<NodeId, Action>,
    road: Vec<TileCoord>,
    spawn_rng: ChaCha8Rng,
    initial_spawns: Vec<SpawnRecord>,
    tick_spawns: Vec<SpawnRecord>,
    recent: VecDeque<Event>,
    ended: Option<EndReason>,
}

impl Session {
    /// Builds the world from the scenario and spawns the configured bots.
    pub fn new(scenario: Scenario, config: SessionConfig) -> Result<Self, NetError> {
        scenario.validate().map_err(|e| NetError::ScenarioInvalid(e.to_string()))?;
        let state = SimState::from_scenario(&scenario).map_err(|e| NetError::ScenarioInvalid(e.to_string()))?;
        let total: u64 = config.bots.iter().map(|b| b.count as u64).sum();
        if total > config.max_nodes as u64 {
            return Err(SessionError::SessionFull.into());
        }
        let road = state.world().road_tiles().collect();
        let mut session = Self {
            spawn_rng: rng::stream(scenario.seed, rng::SPAWN_STREAM),
            scenario,
            config,
            state,
            seats: Vec::new(),
            clients: BTreeMap::new(),
            queue: BTreeMap::new(),
            road,
            initial_spawns: Vec::new(),
            tick_spawns: Vec::new(),
            recent: VecDeque::new(),
            ended: None,
        };
        let catalog_len = session.scenario.catalog.len();
        let mut k = 0;
        for spec in session.config.bots.clone() {
            for _ in 0..spec.count {
                let profile = session.scenario.catalog[k % catalog_len].name.clone();
                let round = k / catalog_len;
                let character = if round == 0 { profile.clone() } else { format!("{profile} {}", round + 1) };
                session.spawn(character, &profile, Controller::Bot(spec.policy));
                k += 1;
            }
        }
        session.initial_spawns = std::mem::take(&mut session.tick_spawns);
        Ok(session)
    }

    fn spawn(&mut self, character: String, profile: &str, controller: Controller) -> NodeId {
        let pos = self.road[self.spawn_rng.gen_range(0..self.road.len())];
        let p = self.scenario.profile(profile).expect("catalog profile").clone();
        let id = self.state.spawn(character.clone(), p, pos).expect("spawn on a road tile");
        self.seats.push(Seat {
            controller,
            claimable: false,
            rng: rng::stream(self.scenario.seed, rng::BOT_STREAM_BASE + id.0 as u64),
        });
        self.tick_spawns.push(SpawnRecord { node: id, character, profile: profile.to_owned(), pos });
        id
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn tick(&self) -> u64 {
        self.state.tick()
    }

    pub fn controller(&self, node: NodeId) -> Option<Controller> {
        self.seats.get(node.0 as usize).map(|s| s.controller)
    }

    pub fn client_node(&self, client: ClientId) -> Option<NodeId> {
        self.clients.get(&client).and_then(|c| c.node)
    }

    pub fn ended(&self) -> Option<EndReason> {
        self.ended
    }

    pub fn world_view(&self) -> WorldView {
        WorldView::new(self.state.world(), self.scenario.env, self.scenario.radios)
    }

    pub fn header(&self) -> ReplayHeader {
        ReplayHeader {
            v: PROTOCOL_VERSION,
            seed: self.scenario.seed,
            scenario: self.scenario.clone(),
            bots: self.config.bots.clone(),
            spawns: self.initial_spawns.clone(),
        }
    }

    /// Applies one client message. Nothing here touches the simulation
    /// except a join, which adds a node for the next tick.
    pub fn handle_message(&mut self, client: ClientId, msg: ClientMessage) -> Result<Ack, SessionError> {
        if msg.v != PROTOCOL_VERSION {
            return Err(SessionError::UnsupportedVersion { got: msg.v });
        }
        let entry = self.clients.entry(client).or_default();
        let expected = entry.last_seq + 1;
        if msg.seq != expected {
            return Err(SessionError::SequenceGap { expected, got: msg.seq });
        }
        entry.last_seq = msg.seq;
        let bound = entry.node;
        match msg.body {
            ClientBody::Join { character, .. } => {
                if bound.is_some() {
                    return Err(SessionError::AlreadyJoined);
                }
                if self.scenario.profile(&character).is_none() {
                    return Err(SessionError::UnknownCharacter { character });
                }
                let existing = self.state.nodes().iter().find(|n| n.character == character).map(|n| n.id);
                let node = match existing {
                    Some(id) => {
                        let seat = &mut self.seats[id.0 as usize];
                        if !seat.claimable {
                            return Err(SessionError::CharacterTaken { character });
                        }
                        seat.claimable = false;
                        seat.controller = Controller::Player(client);
                        id
                    }
                    None => {
                        if self.seats.len() >= self.config.max_nodes {
                            return Err(SessionError::SessionFull);
                        }
                        self.spawn(character.clone(), &character, Controller::Player(client))
                    }
                };
                self.clients.get_mut(&client).unwrap().node = Some(node);
                Ok(Ack::Joined(node))
            }
            ClientBody::Input { command } => {
                let node = bound.ok_or(SessionError::NotJoined)?;
                self.queue.insert(node, command);
                Ok(Ack::Accepted)
            }
            ClientBody::Leave => {
                let node = bound.ok_or(SessionError::NotJoined)?;
                self.release(client, node);
                Ok(Ack::Accepted)
            }
        }
    }

    fn release(&mut self, client: ClientId, node: NodeId) {
        if let Some(c) = self.clients.get_mut(&client) {
            c.node = None;
        }
        let seat = &mut self.seats[node.0 as usize];
        seat.controller = Controller::Bot(self.config.leave_policy);
        seat.claimable = true;
        self.queue.remove(&node);
    }

    /// A dropped connection counts as leaving.
    pub fn disconnect(&mut self, client: ClientId) {
        if let Some(node) = self.client_node(client) {
            self.release(client, node);
        }
        self.clients.remove(&client);
    }

    /// Collects one command per node (queued player input or bot decision)
    /// and advances the simulation one tick.
    pub fn tick_once(&mut self) -> TickOutput {
        let mut commands = Vec::new();
        for i in 0..self.seats.len() {
            let id = NodeId(i as u32);
            match self.seats[i].controller {
                Controller::Player(_) => {
                    if let Some(action) = self.queue.remove(&id) {
                        commands.push(Command::new(id, action));
                    }
                }
                Controller::Bot(policy) => {
                    let cmd = run_policy(policy, &self.state, id, &mut self.seats[i].rng);
                    if cmd.action != Action::Idle {
                        commands.push(cmd);
                    }
                }
            }
        }
        self.queue.clear();
        let events = self.state.step(&commands);
        for e in &events {
            if self.recent.len() == RECENT_EVENTS {
                self.recent.pop_front();
            }
            self.recent.push_back(e.clone());
        }
        if self.state.all_inactive() {
            self.ended = Some(EndReason::AllInactive);
        }
        let record = TickRecord { tick: self.state.tick(), spawns: std::mem::take(&mut self.tick_spawns), commands };
        TickOutput { record, events }
    }

    /// Public snapshot plus, when `node` is given, that node's private view.
    pub fn snapshot(&self, node: Option<NodeId>) -> ServerSnapshot {
        let snap = ServerSnapshot::public(&self.state, self.recent.iter().cloned());
        match node {
            Some(n) => snap.with_private(&self.state, n),
            None => snap,
        }
    }

    pub fn end_record(&self, reason: EndReason) -> EndRecord {
        EndRecord::for_state(&self.state, reason)
    }

    /// Runs headless until `max_ticks` or until every node is depleted,
    /// writing the replay log as it goes.
    pub fn run<W: Write>(&mut self, mode: Mode, max_ticks: u64, out: &mut ReplayWriter<W>) -> Result<RunSummary, NetError> {
        out.write_header(&self.header())?;
        let start = Instant::now();
        let reason = loop {
            if let Some(reason) = self.ended {
                break reason;
            }
            if self.tick() >= max_ticks {
                break EndReason::MaxTicks;
            }
            if let Some(period) = mode.tick_period() {
                let due = start + period * self.tick() as u32;
                if let Some(wait) = due.checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
            }
            let output = self.tick_once();
            out.write_tick(&output)?;
        };
        self.ended = Some(reason);
        out.write_end(&self.end_record(reason))?;
        out.flush()?;
        Ok(RunSummary { ticks: self.tick(), reason, chain_length: self.state.chain().len() as u64 })
    }
}

/// Headless round: builds a session and runs it to completion.
pub fn run_session<W: Write>(
    scenario: Scenario,
    config: SessionConfig,
    mode: Mode,
    max_ticks: u64,
    out: W,
) -> Result<(Session, RunSummary), NetError> {
    let mut session = Session::new(scenario, config)?;
    let mut writer = ReplayWriter::new(out);
    let summary = session.run(mode, max_ticks, &mut writer)?;
    Ok((session, summary))
}
