use crate::chain::{NodeId, Role};
use crate::radio::TechId;
use crate::sim::scenario::{to_micros, EnergyCosts};
use crate::sim::*;
use crate::world::{BaseStation, Direction, Geography, MapParams, TileCoord, World};

fn scenario(catalog: Vec<CharacterProfile>) -> Scenario {
    let mut s = Scenario::new(1, MapParams::new(16, 16), catalog);
    s.map.stations.clear();
    s
}

fn profile(name: &str, role: Role, radios: &[TechId]) -> CharacterProfile {
    CharacterProfile::new(name, role, radios.iter().copied())
}

fn strip(len: usize, stations: Vec<BaseStation>) -> World {
    World::from_ascii(&[&"#".repeat(len)], stations, Geography::Rural).unwrap()
}

fn generated(events: &[Event]) -> Vec<(u64, NodeId)> {
    events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::BlockGenerated { creator, .. } => Some((e.tick, creator)),
            _ => None,
        })
        .collect()
}

#[test]
fn idle_tick_costs_exactly_idle() {
    let s = scenario(vec![profile("A", Role::Full, &[TechId::Wifi])]);
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    let before = state.node(a).unwrap().energy;
    let events = state.step(&[]);
    assert_eq!(state.tick(), 1);
    assert_eq!(before - state.node(a).unwrap().energy, to_micros(0.1).unwrap());
    assert_eq!(events.len(), 1);
    assert!(matches!(events[0].kind, EventKind::EnergyCharged { applied: 100_000, .. }));
}

#[test]
fn generation_on_interval_boundaries() {
    let mut s = scenario(vec![profile("A", Role::Full, &[TechId::Wifi]), profile("B", Role::Half, &[TechId::Wifi])]);
    s.energy.initial = 100_000.0;
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    state.spawn("B", s.catalog[1].clone(), TileCoord::new(7, 0)).unwrap();
    let mut all = Vec::new();
    for _ in 0..10_000 {
        all.extend(state.step(&[]));
    }
    let gens = generated(&all);
    assert_eq!(gens.len(), 200);
    assert!(gens.iter().all(|(t, _)| t % 50 == 0));
    assert_eq!(gens[0].0, 50);
    assert_eq!(gens.last().unwrap().0, 10_000);
}

#[test]
fn no_generation_once_everyone_is_depleted() {
    let mut s = scenario(vec![profile("A", Role::Half, &[TechId::Wifi])]);
    s.energy.initial = 1.0; // ten idle ticks
    s.block_interval_n = 1;
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    let mut all = Vec::new();
    for _ in 0..100 {
        all.extend(state.step(&[]));
    }
    // depleted at tick 10, after that tick's generation phase
    assert_eq!(generated(&all), vec![(10, NodeId(0))]);
    assert!(all.iter().any(|e| e.tick == 10 && matches!(e.kind, EventKind::EnergyDepleted { .. })));
    assert!(state.all_inactive());
}

#[test]
fn step_is_deterministic() {
    let mut s = scenario(vec![profile("A", Role::Full, &[TechId::Wifi]), profile("B", Role::Half, &[TechId::Wifi])]);
    s.block_interval_n = 1;
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    state.spawn("B", s.catalog[1].clone(), TileCoord::new(7, 0)).unwrap();
    for _ in 0..9 {
        state.step(&[]);
    }
    let cmds = [Command::new(NodeId(1), Action::Move { dir: Direction::W })];
    let (s1, e1) = state.stepped(&cmds);
    let (s2, e2) = state.stepped(&cmds);
    assert_eq!(e1, e2);
    assert_eq!(s1.nodes(), s2.nodes());
    assert_eq!(s1.pending(), s2.pending());
}

#[test]
fn moves_onto_open_tiles_are_illegal() {
    let s = scenario(vec![profile("A", Role::Full, &[TechId::Wifi])]);
    let world = World::from_ascii(&["###", "#..", "#.."], vec![], Geography::Urban).unwrap();
    let mut state = SimState::new(&s, world).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 1)).unwrap();
    let east = Command::new(a, Action::Move { dir: Direction::E });
    assert_eq!(state.validate_command(&east), Verdict::Rejected(RejectReason::IllegalMove));
    let north = Command::new(a, Action::Move { dir: Direction::N });
    assert_eq!(state.validate_command(&north), Verdict::Accepted);
    let west = Command::new(a, Action::Move { dir: Direction::W });
    assert_eq!(state.validate_command(&west), Verdict::Rejected(RejectReason::IllegalMove));
    let events = state.step(&[east]);
    assert!(matches!(
        events[0].kind,
        EventKind::IllegalCommand { reason: RejectReason::IllegalMove, .. }
    ));
    assert_eq!(state.node(a).unwrap().pos, TileCoord::new(0, 1));
}

#[test]
fn movement_waits_for_credit() {
    let mut fast = profile("A", Role::Full, &[TechId::Wifi]);
    fast.move_speed = 3.0;
    let s = scenario(vec![fast]);
    let mut state = SimState::new(&s, strip(30, vec![])).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    let mut moved_at = Vec::new();
    for _ in 0..20 {
        let before = state.node(a).unwrap().pos;
        state.step(&[Command::new(a, Action::Move { dir: Direction::E })]);
        if state.node(a).unwrap().pos != before {
            moved_at.push(state.tick());
        }
    }
    // 3 tiles/s at 10 ticks/s: the accumulator crosses a tile on ticks 4, 7, 10, ...
    assert_eq!(moved_at, vec![4, 7, 10, 14, 17, 20]);
}

#[test]
fn jump_crosses_one_obstacle() {
    let mut jumper = profile("A", Role::Half, &[TechId::Wifi]);
    jumper.can_jump = true;
    jumper.move_speed = 10.0;
    let walker = profile("B", Role::Half, &[TechId::Wifi]);
    let s = scenario(vec![jumper, walker]);
    let world = World::from_ascii(&["##B##.#"], vec![], Geography::Urban).unwrap();
    let mut state = SimState::new(&s, world).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(1, 0)).unwrap();
    let b = state.spawn("B", s.catalog[1].clone(), TileCoord::new(0, 0)).unwrap();
    let jump = |n| Command::new(n, Action::Jump { dir: Direction::E });
    assert_eq!(state.validate_command(&jump(b)), Verdict::Rejected(RejectReason::IllegalMove));
    let events = state.step(&[jump(a)]);
    assert_eq!(state.node(a).unwrap().pos, TileCoord::new(3, 0));
    let charged = events.iter().find_map(|e| match e.kind {
        EventKind::EnergyCharged { node, movement, .. } if node == a => Some(movement),
        _ => None,
    });
    assert_eq!(charged, Some(3 * 1_000_000));
    // jumping over road is refused; back over the building is fine
    assert_eq!(state.validate_command(&jump(a)), Verdict::Rejected(RejectReason::IllegalMove));
    assert_eq!(state.validate_command(&Command::new(a, Action::Jump { dir: Direction::W })), Verdict::Accepted);
    // landing on an open tile is refused (jumping south from the top row)
    let world = World::from_ascii(&["##", "#B", "#."], vec![], Geography::Urban).unwrap();
    let mut state = SimState::new(&s, world).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(1, 0)).unwrap();
    let south = Command::new(a, Action::Jump { dir: Direction::S });
    assert_eq!(state.validate_command(&south), Verdict::Rejected(RejectReason::IllegalMove));
}

#[test]
fn half_nodes_cannot_mine() {
    let mut s = scenario(vec![profile("H", Role::Half, &[TechId::Wifi])]);
    s.block_interval_n = 1;
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    let h = state.spawn("H", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    for _ in 0..10 {
        state.step(&[]);
    }
    assert!(state.node(h).unwrap().carried.contains(&0));
    let mine = Command::new(h, Action::Mine { block: 0 });
    assert_eq!(state.validate_command(&mine), Verdict::Rejected(RejectReason::RoleViolation));
    let events = state.step(&[mine]);
    assert!(events.iter().all(|e| e.kind.miner().is_none()));
}

#[test]
fn cellular_transfer_between_covered_nodes() {
    let cell = [TechId::ThreeG];
    let mut s = scenario(vec![profile("A", Role::Half, &cell), profile("B", Role::Full, &cell)]);
    s.block_interval_n = 1;
    s.difficulty_bits = 0;
    let station = BaseStation { tech: TechId::ThreeG, pos: TileCoord::new(10, 0), tx_power: 43.0 };
    let mut state = SimState::new(&s, strip(21, vec![station])).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    let b = state.spawn("B", s.catalog[1].clone(), TileCoord::new(20, 0)).unwrap();
    assert!(state.radio().coverage(TileCoord::new(0, 0), TechId::ThreeG).unwrap());
    assert!(state.radio().coverage(TileCoord::new(20, 0), TechId::ThreeG).unwrap());
    for _ in 0..10 {
        state.step(&[]);
    }
    let (holder, other) = if state.node(a).unwrap().carried.contains(&0) { (a, b) } else { (b, a) };
    let transfer = Command::new(holder, Action::Transfer { block: 0, to: other });
    assert_eq!(state.validate_command(&transfer), Verdict::Accepted);
    let events = state.step(&[transfer]);
    assert!(events.iter().any(|e| matches!(
        e.kind,
        EventKind::TransferCompleted { tech: TechId::ThreeG, block: 0, .. }
    )));
    assert!(state.node(other).unwrap().carried.contains(&0));
    assert!(!state.node(holder).unwrap().carried.contains(&0));
    assert_eq!(state.pending()[&0].holder, other);
    // the sender is charged for transmitting
    let transmit = events.iter().find_map(|e| match e.kind {
        EventKind::EnergyCharged { node, transmit, .. } if node == holder => Some(transmit),
        _ => None,
    });
    assert_eq!(transmit, Some(5_000_000));
}

#[test]
fn transfer_without_link_is_rejected() {
    let mut s = scenario(vec![profile("A", Role::Half, &[TechId::FiveG]), profile("B", Role::Full, &[TechId::FiveG])]);
    s.block_interval_n = 1;
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    let b = state.spawn("B", s.catalog[1].clone(), TileCoord::new(1, 0)).unwrap();
    for _ in 0..10 {
        state.step(&[]);
    }
    let (holder, other) = if state.node(a).unwrap().carried.contains(&0) { (a, b) } else { (b, a) };
    // no 5G station anywhere: adjacent but uncovered
    let t = Command::new(holder, Action::Transfer { block: 0, to: other });
    assert_eq!(state.validate_command(&t), Verdict::Rejected(RejectReason::NoLink));
    let t = Command::new(other, Action::Transfer { block: 0, to: holder });
    assert_eq!(state.validate_command(&t), Verdict::Rejected(RejectReason::NotHolder));
}

#[test]
fn energy_delta_itemization() {
    let costs = EnergyCosts { initial: 1, idle: 100_000, movement: 1_000_000, transmit: 5_000_000, hash: 10_000 };
    let d = account_energy(&costs, &Activity { tiles_moved: 1, hashes: 100, ..Default::default() });
    assert_eq!(d.total(), to_micros(2.1).unwrap());
    let idle = account_energy(&costs, &Activity::default());
    assert_eq!(idle.total(), costs.idle);
}

#[test]
fn depleted_nodes_are_inert() {
    let mut s = scenario(vec![profile("A", Role::Full, &[TechId::Wifi])]);
    s.energy.initial = 0.2;
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    state.step(&[]);
    state.step(&[]);
    assert!(!state.node(a).unwrap().active);
    let before = state.node(a).unwrap().clone();
    let events = state.step(&[Command::new(a, Action::Move { dir: Direction::E })]);
    assert_eq!(events.len(), 1);
    assert!(matches!(events[0].kind, EventKind::IllegalCommand { reason: RejectReason::Inactive, .. }));
    assert_eq!(state.node(a).unwrap(), &before);
}

#[test]
fn duplicate_commands_are_rejected() {
    let s = scenario(vec![profile("A", Role::Full, &[TechId::Wifi])]);
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    let events = state.step(&[Command::new(a, Action::Idle), Command::new(a, Action::Idle)]);
    assert!(matches!(
        events[0].kind,
        EventKind::IllegalCommand { reason: RejectReason::DuplicateCommand, .. }
    ));
}

#[test]
fn fresh_score_is_zero() {
    let s = scenario(vec![profile("A", Role::Full, &[TechId::Wifi])]);
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    let board = score(&state);
    assert_eq!(board.validated_per_minute, 0.0);
    assert_eq!(board.mean_time_to_validation, 0.0);
    assert_eq!(board.nodes[0].points, 0);
    assert_eq!(board.nodes[0].blocks_mined, 0);
}

/// Runs until node 0 (half) has created a block, couriers it to node 1
/// (full) and mines it. Returns the state after the append.
fn create_hand_off_mine(seed: u64) -> Option<SimState> {
    let wifi = [TechId::Wifi];
    let mut s = scenario(vec![profile("A", Role::Half, &wifi), profile("B", Role::Full, &wifi)]);
    s.seed = seed;
    s.block_interval_n = 1;
    s.difficulty_bits = 4;
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    let b = state.spawn("B", s.catalog[1].clone(), TileCoord::new(3, 0)).unwrap();
    for _ in 0..10 {
        state.step(&[]);
    }
    if !state.node(a).unwrap().carried.contains(&0) {
        return None;
    }
    state.step(&[Command::new(a, Action::Transfer { block: 0, to: b })]);
    state.step(&[Command::new(b, Action::Mine { block: 0 })]);
    while state.chain().is_empty() {
        state.step(&[]);
    }
    Some(state)
}

#[test]
fn creator_and_miner_points() {
    let state = (0..20).find_map(create_hand_off_mine).expect("some seed gives A the first block");
    let board = score(&state);
    assert_eq!(board.nodes[0].points, 1);
    assert_eq!(board.nodes[0].blocks_created_validated, 1);
    assert_eq!(board.nodes[1].points, 3);
    assert_eq!(board.nodes[1].blocks_mined, 1);
    assert_eq!(board.chain_length, 1);
    let v = state.validations()[0];
    assert_eq!(board.mean_time_to_validation, (v.appended_tick - v.created_tick) as f64);
    assert!(state.chain().verify(state.config().target));
}

#[test]
fn expiry_releases_blocks() {
    let mut s = scenario(vec![profile("A", Role::Full, &[TechId::Wifi])]);
    s.block_interval_n = 1;
    s.expiry_ticks = 25;
    s.difficulty_bits = 64; // never found in time
    let mut state = SimState::new(&s, strip(8, vec![])).unwrap();
    let a = state.spawn("A", s.catalog[0].clone(), TileCoord::new(0, 0)).unwrap();
    let mut all = Vec::new();
    for _ in 0..10 {
        all.extend(state.step(&[]));
    }
    all.extend(state.step(&[Command::new(a, Action::Mine { block: 0 })]));
    for _ in 0..30 {
        all.extend(state.step(&[]));
    }
    let expired_at = all.iter().find_map(|e| match e.kind {
        EventKind::BlockExpired { block: 0, holder } => Some((e.tick, holder)),
        _ => None,
    });
    assert_eq!(expired_at, Some((35, a)));
    // the job ended unsuccessfully right before expiry
    let i = all.iter().position(|e| matches!(e.kind, EventKind::BlockExpired { block: 0, .. })).unwrap();
    assert!(matches!(all[i - 1].kind, EventKind::MiningResult { block: 0, found: false, .. }));
    assert!(!state.pending().contains_key(&0));
    assert!(state.node(a).unwrap().job.as_ref().is_none_or(|j| j.block.id != 0));
}

#[test]
fn validated_rate_per_minute() {
    assert_eq!(score::validated_per_minute(12, 6000), 1.2);
    assert_eq!(score::validated_per_minute(0, 6000), 0.0);
    assert_eq!(score::validated_per_minute(5, 0), 0.0);
}
