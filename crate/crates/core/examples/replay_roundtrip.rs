//! Records a round, verifies it, tampers with one event and verifies again,
//! then derives the metrics tables from the log.

use blockroam::net::{export_metrics, replay_verify, run_session, BotSpec, Mode, SessionConfig};
use blockroam::sim::load_scenario;

fn main() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/countryside.json");
    let scenario = load_scenario(&std::fs::read_to_string(path).unwrap()).unwrap();
    let bots: Vec<BotSpec> = vec!["courier:3".parse().unwrap(), "greedy:2".parse().unwrap()];

    let mut log = Vec::new();
    let (_, summary) = run_session(scenario, SessionConfig::with_bots(bots), Mode::Turbo, 800, &mut log).unwrap();
    let log = String::from_utf8(log).unwrap();
    println!("recorded {} ticks, {} lines", summary.ticks, log.lines().count());
    println!("verify: {:?}", replay_verify(&log).unwrap());

    // drop the first mining or transfer event after tick 400
    let lines: Vec<&str> = log.lines().collect();
    let victim = lines
        .iter()
        .position(|l| {
            l.starts_with("{\"type\":\"event\"")
                && !l.contains("energy_charged")
                && serde_json::from_str::<serde_json::Value>(l).unwrap()["tick"].as_u64() > Some(400)
        })
        .expect("an interesting event");
    println!("removing: {}", lines[victim]);
    let tampered: String = lines.iter().enumerate().filter(|(i, _)| *i != victim).map(|(_, l)| format!("{l}\n")).collect();
    println!("verify tampered: {:?}", replay_verify(&tampered).unwrap());

    let report = export_metrics(&log).unwrap();
    print!("\n{}", report.nodes_csv().unwrap());
    print!("\n{}", report.series_csv().unwrap());
}
