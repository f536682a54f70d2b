//! A half node carries a fresh block down a straight road toward a full
//! node, hands it off once WiFi links, and the full node mines it.

use blockroam::chain::Role;
use blockroam::radio::TechId;
use blockroam::sim::{Action, CharacterProfile, Command, EventKind, Scenario, SimState};
use blockroam::world::{Direction, Geography, MapParams, TileCoord, World};

fn main() {
    let courier = CharacterProfile::new("Courier", Role::Half, [TechId::Wifi]);
    let miner = CharacterProfile::new("Miner", Role::Full, [TechId::Wifi]);
    let mut scenario = Scenario::new(1, MapParams::new(32, 32), vec![courier, miner]);
    scenario.map.stations.clear();
    scenario.block_interval_n = 1;
    scenario.radios.get_mut(TechId::Wifi).sensitivity = -30.0;

    let road = World::from_ascii(&["#".repeat(21).as_str()], vec![], Geography::Rural).unwrap();
    let mut state = SimState::new(&scenario, road).unwrap();
    let c = state.spawn("Courier", scenario.catalog[0].clone(), TileCoord::new(5, 0)).unwrap();
    let m = state.spawn("Miner", scenario.catalog[1].clone(), TileCoord::new(15, 0)).unwrap();

    while state.tick() < 300 && state.chain().is_empty() {
        let mut cmds = Vec::new();
        let linked = state.link_between(c, m).is_some();
        match state.node(c).unwrap().carried.iter().next().copied() {
            Some(block) if linked => cmds.push(Command::new(c, Action::Transfer { block, to: m })),
            _ if !linked => cmds.push(Command::new(c, Action::Move { dir: Direction::E })),
            _ => {}
        }
        match state.node(m).unwrap().carried.iter().next().copied() {
            Some(block) if linked => cmds.push(Command::new(m, Action::Mine { block })),
            _ if !linked => cmds.push(Command::new(m, Action::Move { dir: Direction::W })),
            _ => {}
        }
        for e in state.step(&cmds) {
            match &e.kind {
                EventKind::EnergyCharged { .. } | EventKind::MiningAttempted { .. } => {}
                kind => println!("tick {:>3}: {kind:?}", e.tick),
            }
        }
    }
    let (cn, mn) = (state.node(c).unwrap(), state.node(m).unwrap());
    println!(
        "courier at x={}, miner at x={}, chain length {}",
        cn.pos.x,
        mn.pos.x,
        state.chain().len()
    );
}
