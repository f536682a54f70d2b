//! Runs a bot-only round on the bundled campus scenario and prints the
//! score table.
//!
//! `cargo run --release --example headless_round -- 3000`

use std::path::Path;

use blockroam::net::{run_session, BotSpec, Mode, SessionConfig};
use blockroam::sim::scenario::micros_to_units;
use blockroam::sim::{load_scenario, score};

fn main() {
    let ticks = std::env::args().nth(1).map_or(3000, |t| t.parse().expect("tick count"));
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/campus.json");
    let scenario = load_scenario(&std::fs::read_to_string(path).unwrap()).unwrap();
    let bots: Vec<BotSpec> = ["courier:4", "greedy_coverage:2", "random_walk:2"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();

    let mut log = Vec::new();
    let (session, summary) =
        run_session(scenario, SessionConfig::with_bots(bots), Mode::Turbo, ticks, &mut log).unwrap();
    println!("{summary:?}; replay is {} KiB", log.len() / 1024);

    let board = score(session.state());
    println!("{:>4} {:<10} {:<5} {:>8} {:>6} {:>6} {:>9}", "id", "character", "role", "created", "mined", "points", "energy");
    for id in board.ranking() {
        let row = &board.nodes[id.0 as usize];
        println!(
            "{:>4} {:<10} {:<5} {:>8} {:>6} {:>6} {:>9.1}",
            row.node.0,
            row.character,
            format!("{:?}", row.role).to_lowercase(),
            row.blocks_created_validated,
            row.blocks_mined,
            row.points,
            micros_to_units(row.energy_remaining)
        );
    }
    println!(
        "{} blocks validated ({:.2}/min), mean time to validation {:.0} ticks",
        board.chain_length, board.validated_per_minute, board.mean_time_to_validation
    );
}
