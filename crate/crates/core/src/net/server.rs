//! WebSocket front end for a [`Session`].
//!
//! One task owns the session and runs the tick loop. Each connection gets a
//! reader that forwards frames into the loop's inbound queue and a writer
//! that drains the connection's outbound queue; nothing else is shared.

use std::collections::BTreeMap;
use std::fs::File;
use std::future::Future;
use std::io::BufWriter;
use std::net::SocketAddr;
use std::path::PathBuf;

use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;

use crate::net::protocol::{parse_client, EndReason, ServerBody, ServerMessage};
use crate::net::replay::ReplayWriter;
use crate::net::session::{Ack, ClientId, Mode, RunSummary, Session, SessionConfig};
use crate::net::NetError;
use crate::sim::Scenario;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub session: SessionConfig,
    pub mode: Mode,
    /// Ends the round after this many ticks; otherwise it runs until every
    /// node is depleted or the stop signal fires.
    pub max_ticks: Option<u64>,
    pub replay_out: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self { session: SessionConfig::default(), mode: Mode::Realtime, max_ticks: None, replay_out: None }
    }
}

enum Inbound {
    Connect { client: ClientId, out: mpsc::UnboundedSender<String> },
    Frame { client: ClientId, text: String },
    Disconnect { client: ClientId },
}

pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub async fn bind(addr: &str) -> Result<Self, NetError> {
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| NetError::PortUnavailable { addr: addr.to_owned(), source })?;
        Ok(Self { listener })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, NetError> {
        Ok(self.listener.local_addr()?)
    }

    pub async fn run(self, scenario: Scenario, config: ServerConfig) -> Result<RunSummary, NetError> {
        self.run_until(scenario, config, std::future::pending()).await
    }

    /// Serves one round, ending early with [`EndReason::Stopped`] when
    /// `stop` completes.
    pub async fn run_until(
        self,
        scenario: Scenario,
        config: ServerConfig,
        stop: impl Future<Output = ()>,
    ) -> Result<RunSummary, NetError> {
        let mut session = Session::new(scenario, config.session.clone())?;
        let mut replay = match &config.replay_out {
            Some(path) => Some(ReplayWriter::new(BufWriter::new(File::create(path)?))),
            None => None,
        };
        if let Some(w) = replay.as_mut() {
            w.write_header(&session.header())?;
        }

        let (tx, mut rx) = mpsc::unbounded_channel();
        let acceptor = tokio::spawn(accept_loop(self.listener, tx));
        let mut clients: BTreeMap<ClientId, mpsc::UnboundedSender<String>> = BTreeMap::new();
        let mut ticker = config.mode.tick_period().map(|p| {
            let mut t = tokio::time::interval(p);
            t.set_missed_tick_behavior(MissedTickBehavior::Delay);
            t
        });
        tokio::pin!(stop);

        let reason = loop {
            if let Some(reason) = session.ended() {
                break reason;
            }
            if config.max_ticks.is_some_and(|m| session.tick() >= m) {
                break EndReason::MaxTicks;
            }
            match ticker.as_mut() {
                Some(t) => {
                    tokio::select! {
                        biased;
                        _ = &mut stop => break EndReason::Stopped,
                        Some(msg) = rx.recv() => {
                            on_inbound(&mut session, &mut clients, msg);
                            continue;
                        }
                        _ = t.tick() => {}
                    }
                }
                None => {
                    while let Ok(msg) = rx.try_recv() {
                        on_inbound(&mut session, &mut clients, msg);
                    }
                    tokio::select! {
                        biased;
                        _ = &mut stop => break EndReason::Stopped,
                        _ = tokio::task::yield_now() => {}
                    }
                }
            }
            let output = session.tick_once();
            if let Some(w) = replay.as_mut() {
                w.write_tick(&output)?;
            }
            if !clients.is_empty() {
                let public = session.snapshot(None);
                for (client, out) in &clients {
                    let snap = match session.client_node(*client) {
                        Some(node) => public.clone().with_private(session.state(), node),
                        None => public.clone(),
                    };
                    let _ = out.send(ServerMessage::new(ServerBody::Snapshot(snap)).to_json());
                }
            }
        };

        let end = ServerMessage::new(ServerBody::End { tick: session.tick(), reason }).to_json();
        for out in clients.values() {
            let _ = out.send(end.clone());
        }
        if let Some(mut w) = replay {
            w.write_end(&session.end_record(reason))?;
            w.flush()?;
        }
        acceptor.abort();
        Ok(RunSummary { ticks: session.tick(), reason, chain_length: session.state().chain().len() as u64 })
    }
}

fn on_inbound(session: &mut Session, clients: &mut BTreeMap<ClientId, mpsc::UnboundedSender<String>>, msg: Inbound) {
    match msg {
        Inbound::Connect { client, out } => {
            clients.insert(client, out);
        }
        Inbound::Disconnect { client } => {
            session.disconnect(client);
            clients.remove(&client);
        }
        Inbound::Frame { client, text } => {
            let Some(out) = clients.get(&client) else { return };
            let reply = match parse_client(&text) {
                Err(error) => vec![ServerBody::Reject { seq: None, error }],
                Ok(msg) => {
                    let seq = msg.seq;
                    match session.handle_message(client, msg) {
                        Ok(Ack::Joined(node)) => vec![
                            ServerBody::Joined { seq, node, world: session.world_view() },
                            ServerBody::Snapshot(session.snapshot(Some(node))),
                        ],
                        Ok(Ack::Accepted) => vec![ServerBody::Ack { seq }],
                        Err(error) => vec![ServerBody::Reject { seq: Some(seq), error }],
                    }
                }
            };
            for body in reply {
                let _ = out.send(ServerMessage::new(body).to_json());
            }
        }
    }
}

async fn accept_loop(listener: TcpListener, tx: mpsc::UnboundedSender<Inbound>) {
    let mut next: ClientId = 1;
    while let Ok((stream, _)) = listener.accept().await {
        let client = next;
        next += 1;
        tokio::spawn(connection(stream, client, tx.clone()));
    }
}

async fn connection(stream: TcpStream, client: ClientId, tx: mpsc::UnboundedSender<Inbound>) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::debug!("handshake with client {client} failed: {e}");
            return;
        }
    };
    let (mut sink, mut frames) = ws.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    if tx.send(Inbound::Connect { client, out: out_tx }).is_err() {
        return;
    }
    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink.send(Message::text(text)).await.is_err() {
                return;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(frame) = frames.next().await {
        match frame {
            Ok(Message::Text(text)) => {
                if tx.send(Inbound::Frame { client, text: text.to_string() }).is_err() {
                    break;
                }
            }
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    let _ = tx.send(Inbound::Disconnect { client });
    let _ = writer.await;
}
