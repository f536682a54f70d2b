//! Fuzz harness shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blockroam::chain::{NodeId, Role};
use blockroam::radio::TechId;
use blockroam::sim::scenario::EnergyParams;
use blockroam::sim::{Action, CharacterProfile, Command, Event, EventKind, Scenario, SimState};
use blockroam::world::{Direction, MapParams, TileCoord};

pub fn fuzz_catalog() -> Vec<CharacterProfile> {
    let mut jumper = CharacterProfile::new("Jumper", Role::Half, [TechId::Bluetooth, TechId::Wifi]);
    jumper.can_jump = true;
    jumper.move_speed = 4.0;
    let mut shielded = CharacterProfile::new("Shielded", Role::Full, [TechId::Wifi, TechId::ThreeG]);
    shielded.penetration_bonus = 10.0;
    shielded.mining_rate = 16;
    vec![
        CharacterProfile::new("Miner", Role::Full, [TechId::Wifi, TechId::FiveG]),
        CharacterProfile::new("Walker", Role::Half, [TechId::ThreeG, TechId::FiveG]),
        jumper,
        shielded,
    ]
}

/// A small, fast, eventful round: short interval, low difficulty, tight
/// radios and a battery that runs out within a few hundred ticks.
pub fn fuzz_scenario(seed: u64) -> Scenario {
    let mut map = MapParams::new(20, 16);
    map.obstacle_density = 0.3;
    let mut s = Scenario::new(seed, map, fuzz_catalog());
    s.block_interval_n = 1;
    s.difficulty_bits = 6;
    s.expiry_ticks = 150;
    s.energy = EnergyParams { initial: 60.0, ..EnergyParams::default() };
    s.radios.get_mut(TechId::Wifi).sensitivity = -40.0;
    s.radios.get_mut(TechId::Bluetooth).sensitivity = -55.0;
    s
}

pub fn spawn_all(state: &mut SimState, scenario: &Scenario, rng: &mut impl Rng) {
    let road: Vec<TileCoord> = state.world().road_tiles().collect();
    for p in &scenario.catalog {
        let pos = road[rng.gen_range(0..road.len())];
        state.spawn(p.name.clone(), p.clone(), pos).unwrap();
    }
}

fn random_dir(rng: &mut impl Rng) -> Direction {
    Direction::ALL[rng.gen_range(0..4)]
}

/// Random, mostly plausible commands. Some target blocks the issuer does not
/// hold, nodes that do not exist, or are duplicated.
pub fn random_commands(state: &SimState, rng: &mut impl Rng) -> Vec<Command> {
    let n = state.nodes().len() as u32;
    let pending: Vec<u64> = state.pending().keys().copied().collect();
    let mut cmds = Vec::new();
    for node in state.nodes() {
        if rng.gen_bool(0.15) {
            continue;
        }
        let block = |rng: &mut ChaCha8Rng| -> u64 {
            let carried: Vec<u64> = node.carried.iter().copied().collect();
            if !carried.is_empty() && rng.gen_bool(0.8) {
                carried[rng.gen_range(0..carried.len())]
            } else if !pending.is_empty() {
                pending[rng.gen_range(0..pending.len())]
            } else {
                rng.gen_range(0..50)
            }
        };
        let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
        let action = match rng.gen_range(0..10) {
            0..=3 => Action::Move { dir: random_dir(rng) },
            4 => Action::Jump { dir: random_dir(rng) },
            5 | 6 => Action::Transfer { block: block(&mut local), to: NodeId(rng.gen_range(0..n + 1)) },
            7 | 8 => Action::Mine { block: block(&mut local) },
            _ => Action::Idle,
        };
        cmds.push(Command::new(node.id, action));
        if rng.gen_bool(0.03) {
            cmds.push(Command::new(node.id, Action::Idle));
        }
    }
    if rng.gen_bool(0.02) {
        cmds.push(Command::new(NodeId(n + 3), Action::Idle));
    }
    cmds
}

pub struct FuzzRun {
    pub scenario: Scenario,
    pub initial: SimState,
    pub state: SimState,
    pub events: Vec<Event>,
    pub commands: Vec<Vec<Command>>,
    /// Positions of every node after each tick (index 0 = spawn).
    pub positions: Vec<Vec<TileCoord>>,
    /// For every TransferCompleted: the state right after that tick.
    pub transfer_states: Vec<(Event, SimState)>,
}

/// Runs `ticks` ticks of random commands (or until everyone is depleted).
pub fn fuzz_run(seed: u64, ticks: u64) -> FuzzRun {
    let scenario = fuzz_scenario(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut state = SimState::from_scenario(&scenario).unwrap();
    spawn_all(&mut state, &scenario, &mut rng);
    let initial = state.clone();
    let mut events = Vec::new();
    let mut commands = Vec::new();
    let mut positions = vec![state.nodes().iter().map(|n| n.pos).collect()];
    let mut transfer_states = Vec::new();
    for _ in 0..ticks {
        if state.all_inactive() {
            break;
        }
        let cmds = random_commands(&state, &mut rng);
        let evs = state.step(&cmds);
        for e in &evs {
            if matches!(e.kind, EventKind::TransferCompleted { .. }) {
                transfer_states.push((e.clone(), state.clone()));
            }
        }
        positions.push(state.nodes().iter().map(|n| n.pos).collect());
        events.extend(evs);
        commands.push(cmds);
    }
    FuzzRun { scenario, initial, state, events, commands, positions, transfer_states }
}

/// Independent per-node energy oracle: rebuilds every node's spend from
/// observable facts (positions, transfers, hash counts) and the cost table.
pub fn energy_oracle(run: &FuzzRun) -> Result<(), String> {
    let costs = run.scenario.energy.costs().unwrap();
    let n = run.initial.nodes().len();
    let mut energy = vec![costs.initial; n];
    let mut active = vec![true; n];
    let mut by_tick: BTreeMap<u64, Vec<&Event>> = BTreeMap::new();
    for e in &run.events {
        by_tick.entry(e.tick).or_default().push(e);
    }
    for (t, pos) in run.positions.windows(2).enumerate() {
        let tick = t as u64 + 1;
        let evs = by_tick.get(&tick).cloned().unwrap_or_default();
        for i in 0..n {
            if !active[i] {
                if pos[0][i] != pos[1][i] {
                    return Err(format!("inactive node {i} moved at tick {tick}"));
                }
                continue;
            }
            let (a, b) = (pos[0][i], pos[1][i]);
            let tiles = a.x.abs_diff(b.x) + a.y.abs_diff(b.y);
            let movement = match tiles {
                0 => 0,
                1 => costs.movement,
                2 => 3 * costs.movement,
                d => return Err(format!("node {i} moved {d} tiles at tick {tick}")),
            };
            let transfers = evs
                .iter()
                .filter(|e| matches!(e.kind, EventKind::TransferCompleted { from, .. } if from.0 as usize == i))
                .count() as i64;
            let hashes: u64 = evs
                .iter()
                .filter_map(|e| match e.kind {
                    EventKind::MiningAttempted { miner, attempts, .. } if miner.0 as usize == i => Some(attempts),
                    _ => None,
                })
                .sum();
            let due = costs.idle + movement + transfers * costs.transmit + hashes as i64 * costs.hash;
            let charged = evs.iter().find_map(|e| match e.kind {
                EventKind::EnergyCharged { node, idle, movement, transmit, hashing, applied } if node.0 as usize == i => {
                    Some((idle + movement + transmit + hashing, applied))
                }
                _ => None,
            });
            let Some((itemized, applied)) = charged else {
                return Err(format!("node {i} not charged at tick {tick}"));
            };
            if itemized != due {
                return Err(format!("node {i} tick {tick}: itemized {itemized}, oracle {due}"));
            }
            let expected_applied = due.min(energy[i]);
            if applied != expected_applied {
                return Err(format!("node {i} tick {tick}: applied {applied}, expected {expected_applied}"));
            }
            energy[i] -= applied;
            if energy[i] == 0 {
                active[i] = false;
            }
        }
    }
    for (i, node) in run.state.nodes().iter().enumerate() {
        if node.energy != energy[i] {
            return Err(format!("node {i}: final {} vs oracle {}", node.energy, energy[i]));
        }
        let applied: i64 = run
            .events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::EnergyCharged { node, applied, .. } if node.0 as usize == i => Some(applied),
                _ => None,
            })
            .sum();
        if costs.initial - node.energy != applied {
            return Err(format!("node {i}: ledger does not close"));
        }
    }
    Ok(())
}

/// Every transfer's link, recomputed from the positions it was made at.
pub fn transfer_links_hold(run: &FuzzRun) -> Result<(), String> {
    for (e, state) in &run.transfer_states {
        let EventKind::TransferCompleted { from, to, tech, margin, .. } = e.kind else { unreachable!() };
        let (a, b) = (state.node(from).unwrap().endpoint(), state.node(to).unwrap().endpoint());
        let v = state.radio().link_up(&a, &b, tech).map_err(|err| format!("tick {}: {err}", e.tick))?;
        if !v.usable || v.margin != margin {
            return Err(format!("tick {}: recomputed {v:?}, logged margin {margin}", e.tick));
        }
        if tech.is_infrastructure()
            && !(state.radio().coverage(a.pos, tech).unwrap() && state.radio().coverage(b.pos, tech).unwrap())
        {
            return Err(format!("tick {}: {tech} transfer with an uncovered endpoint", e.tick));
        }
    }
    Ok(())
}

pub fn half_miners(run: &FuzzRun) -> Vec<Event> {
    run.events
        .iter()
        .filter(|e| e.kind.miner().is_some_and(|m| run.state.node(m).unwrap().role() == Role::Half))
        .cloned()
        .collect()
}
