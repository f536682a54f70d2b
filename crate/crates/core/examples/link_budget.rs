//! Tabulates path loss and link margin for every radio over open ground and
//! behind obstacles.

use blockroam::radio::{open_ground_range_tiles, PropagationEnv, RadioTable, TechId};
use blockroam::world::{Geography, ObstacleKind};

fn main() {
    let env = PropagationEnv::default();
    let table = RadioTable::default();
    let distances = [10.0, 50.0, 100.0, 250.0, 500.0, 1000.0];

    for geo in [Geography::Urban, Geography::Rural] {
        println!("{geo:?} (exponent {})", env.exponent_for(geo));
        print!("{:>10}", "tech");
        for d in distances {
            print!("{:>9}", format!("{d} m"));
        }
        println!("{:>12}", "range");
        for tech in TechId::ALL {
            let radio = table.get(tech);
            let model = env.model(geo, radio);
            print!("{:>10}", tech.to_string());
            for d in distances {
                let margin = radio.tx_power - model.path_loss_db(d, &[], 0.0) - radio.sensitivity;
                print!("{margin:>9.1}");
            }
            println!("{:>9.1} t", open_ground_range_tiles(&model, radio.tx_power, radio.sensitivity));
        }
        println!();
    }

    let wifi = table.get(TechId::Wifi);
    let model = env.model(Geography::Urban, wifi);
    println!("WiFi at 100 m, urban:");
    for (label, obstacles, bonus) in [
        ("clear", vec![], 0.0),
        ("behind a car", vec![ObstacleKind::Car], 0.0),
        ("behind a building", vec![ObstacleKind::Building], 0.0),
        ("behind a building, 10 dB bonus", vec![ObstacleKind::Building], 10.0),
    ] {
        let loss = model.path_loss_db(100.0, &obstacles, bonus);
        println!("  {label:<32} loss {loss:6.1} dB, margin {:6.1} dB", wifi.tx_power - loss - wifi.sensitivity);
    }
}
