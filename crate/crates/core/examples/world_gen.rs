//! Generates a map from a seed and prints it with road statistics.
//!
//! `cargo run --example world_gen -- 42 40 20`

use blockroam::world::{generate_world, Geography, MapParams};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let seed = args.first().copied().unwrap_or(42);
    let mut params = MapParams::new(
        args.get(1).copied().unwrap_or(40) as u32,
        args.get(2).copied().unwrap_or(20) as u32,
    );
    params.geography = Geography::Urban;

    let world = generate_world(seed, &params).expect("valid parameters");
    print!("{}", world.to_ascii());

    let roads = world.road_tiles().count();
    println!(
        "\nseed {seed}: {}x{} {:?}, {roads} road tiles, largest connected stretch {}",
        world.width(),
        world.height(),
        world.geography(),
        world.largest_road_component()
    );
    for s in world.stations() {
        println!("  {} station at ({}, {}), {} dBm", s.tech, s.pos.x, s.pos.y, s.tx_power);
    }
    assert_eq!(world.to_ascii(), generate_world(seed, &params).unwrap().to_ascii());
}
