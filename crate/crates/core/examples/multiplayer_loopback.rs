//! Starts the WebSocket server on loopback with two bots, joins as a player,
//! walks around for a few seconds and prints what the server sends back.

use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio_tungstenite::tungstenite::Message;

use blockroam::net::protocol::{ClientMessage, ServerBody, ServerMessage};
use blockroam::net::{BotSpec, Mode, Server, ServerConfig, SessionConfig};
use blockroam::sim::{load_scenario, Action};
use blockroam::world::Direction;

fn encode(msg: ClientMessage) -> Message {
    Message::text(serde_json::to_string(&msg).unwrap())
}

#[tokio::main]
async fn main() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/campus.json");
    let scenario = load_scenario(&std::fs::read_to_string(path).unwrap()).unwrap();
    let server = Server::bind("127.0.0.1:0").await.unwrap();
    let url = format!("ws://{}", server.local_addr().unwrap());
    let config = ServerConfig {
        session: SessionConfig::with_bots(vec!["courier:2".parse::<BotSpec>().unwrap()]),
        mode: Mode::Realtime,
        max_ticks: Some(40),
        replay_out: None,
    };
    let round = tokio::spawn(server.run(scenario, config));

    let (mut ws, _) = tokio_tungstenite::connect_async(&url).await.unwrap();
    ws.send(encode(ClientMessage::join(1, "player", "Carol"))).await.unwrap();

    let mut seq = 1;
    let mut rows: Vec<String> = Vec::new();
    while let Some(Ok(frame)) = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.ok().flatten() {
        let Message::Text(text) = frame else { continue };
        let msg: ServerMessage = serde_json::from_str(&text).unwrap();
        match msg.body {
            ServerBody::Joined { node, world, .. } => {
                println!("joined as node {} on a {}x{} map", node.0, world.width, world.height);
                rows = world.rows;
            }
            ServerBody::Snapshot(s) => {
                let me = s.private.as_ref().map(|p| p.node);
                let pos = me.map(|n| s.nodes[n.0 as usize].pos);
                if s.tick % 10 == 0 {
                    println!("tick {:>3}: {} nodes, chain {}, me at {pos:?}", s.tick, s.nodes.len(), s.chain.length);
                    seq += 1;
                    let on_road = |d: &Direction| {
                        pos.and_then(|p| p.step(*d, 1))
                            .and_then(|t| rows.get(t.y as usize).and_then(|r| r.as_bytes().get(t.x as usize)))
                            .is_some_and(|g| *g == b'#')
                    };
                    // turn through the compass each time, taking the first open road
                    let turn = (s.tick / 10) as usize;
                    let dir = (0..4).map(|i| Direction::ALL[(turn + i) % 4]).find(on_road);
                    let action = dir.map_or(Action::Idle, |dir| Action::Move { dir });
                    ws.send(encode(ClientMessage::input(seq, action))).await.unwrap();
                }
            }
            ServerBody::Ack { seq } => println!("ack {seq}"),
            ServerBody::Reject { seq, error } => println!("reject {seq:?}: {error}"),
            ServerBody::End { tick, reason } => {
                println!("round over at tick {tick}: {reason:?}");
                break;
            }
        }
    }
    println!("{:?}", round.await.unwrap().unwrap());
}
