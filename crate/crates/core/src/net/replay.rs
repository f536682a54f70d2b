//! Newline-delimited JSON replay logs.
//!
//! ```text
//! {"type":"header","v":1,"seed":..,"scenario":{..},"bots":[..],"spawns":[..]}
//! {"type":"tick","tick":1,"commands":[..]}
//! {"type":"event","tick":1,"seq":0,"kind":"energy_charged",..}
//! ...
//! {"type":"end","tick":..,"reason":"max_ticks","chain_length":..,"head_hash":".."}
//! ```
//!
//! The log records every command the simulation received, bots included,
//! so verification re-simulates from the header alone.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::chain::NodeId;
use crate::net::bots::BotSpec;
use crate::net::protocol::EndReason;
use crate::net::session::TickOutput;
use crate::net::NetError;
use crate::sim::{Command, Event, Scenario, SimState};
use crate::world::TileCoord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpawnRecord {
    pub node: NodeId,
    pub character: String,
    /// Catalog profile name.
    pub profile: String,
    pub pos: TileCoord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayHeader {
    pub v: u32,
    pub seed: u64,
    pub scenario: Scenario,
    pub bots: Vec<BotSpec>,
    pub spawns: Vec<SpawnRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    /// Nodes that joined before this tick's step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spawns: Vec<SpawnRecord>,
    pub commands: Vec<Command>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndRecord {
    pub tick: u64,
    pub reason: EndReason,
    pub chain_length: u64,
    pub head_hash: String,
}

impl EndRecord {
    pub fn for_state(state: &SimState, reason: EndReason) -> Self {
        Self {
            tick: state.tick(),
            reason,
            chain_length: state.chain().len() as u64,
            head_hash: hex::encode(state.chain().head_hash()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReplayLine {
    Header(Box<ReplayHeader>),
    Tick(TickRecord),
    Event(Event),
    End(EndRecord),
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a ReplayHeader),
    Tick(&'a TickRecord),
    Event(&'a Event),
    End(&'a EndRecord),
}

fn line(l: LineRef<'_>) -> String {
    serde_json::to_string(&l).expect("replay lines serialize")
}

pub fn event_line(e: &Event) -> String {
    line(LineRef::Event(e))
}

pub struct ReplayWriter<W: Write> {
    out: W,
}

impl<W: Write> ReplayWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    fn put(&mut self, text: String) -> io::Result<()> {
        self.out.write_all(text.as_bytes())?;
        self.out.write_all(b"\n")
    }

    pub fn write_header(&mut self, h: &ReplayHeader) -> io::Result<()> {
        self.put(line(LineRef::Header(h)))
    }

    pub fn write_tick(&mut self, t: &TickOutput) -> io::Result<()> {
        self.put(line(LineRef::Tick(&t.record)))?;
        for e in &t.events {
            self.put(event_line(e))?;
        }
        Ok(())
    }

    pub fn write_end(&mut self, e: &EndRecord) -> io::Result<()> {
        self.put(line(LineRef::End(e)))
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> NetError {
    NetError::MalformedLog { line, reason: reason.into() }
}

/// Parses a whole log into typed lines.
pub fn parse_log(log: &str) -> Result<Vec<ReplayLine>, NetError> {
    log.lines()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| malformed(i + 1, e.to_string())))
        .collect()
}

/// Builds the initial simulation state a log's header describes.
pub fn state_from_header(header: &ReplayHeader) -> Result<SimState, NetError> {
    if header.seed != header.scenario.seed {
        return Err(malformed(1, "header seed disagrees with the scenario"));
    }
    let mut state = SimState::from_scenario(&header.scenario).map_err(|e| NetError::ScenarioInvalid(e.to_string()))?;
    apply_spawns(&mut state, &header.scenario, &header.spawns, 1)?;
    Ok(state)
}

fn apply_spawns(state: &mut SimState, scenario: &Scenario, spawns: &[SpawnRecord], line: usize) -> Result<(), NetError> {
    for s in spawns {
        let profile = scenario.profile(&s.profile).ok_or_else(|| malformed(line, format!("unknown profile {}", s.profile)))?;
        let id = state.spawn(s.character.clone(), profile.clone(), s.pos).map_err(|e| malformed(line, e.to_string()))?;
        if id != s.node {
            return Err(malformed(line, format!("spawn recorded as {} but would be {}", s.node, id)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum VerifyOutcome {
    Pass { ticks: u64 },
    /// First tick whose regenerated lines differ from the log.
    Fail { tick: u64 },
}

fn line_type(text: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    v.get("type")?.as_str().map(str::to_owned)
}

/// Re-simulates a log from its header and recorded commands and compares
/// every event line byte for byte.
pub fn replay_verify(log: &str) -> Result<VerifyOutcome, NetError> {
    let lines: Vec<&str> = log.lines().collect();
    let header = match lines.first().map(|l| serde_json::from_str::<ReplayLine>(l)) {
        Some(Ok(ReplayLine::Header(h))) => h,
        Some(Ok(_)) => return Err(malformed(1, "first line is not a header")),
        Some(Err(e)) => return Err(malformed(1, e.to_string())),
        None => return Err(malformed(1, "empty log")),
    };
    let mut state = state_from_header(&header)?;
    let mut i = 1;
    loop {
        let Some(text) = lines.get(i) else {
            return Err(malformed(i + 1, "missing end record"));
        };
        match serde_json::from_str::<ReplayLine>(text) {
            Ok(ReplayLine::Tick(rec)) => {
                if rec.tick != state.tick() + 1 {
                    return Ok(VerifyOutcome::Fail { tick: state.tick() + 1 });
                }
                apply_spawns(&mut state, &header.scenario, &rec.spawns, i + 1)?;
                let events = state.step(&rec.commands);
                i += 1;
                let start = i;
                while i < lines.len() && !matches!(line_type(lines[i]).as_deref(), Some("tick" | "end")) {
                    i += 1;
                }
                let logged = &lines[start..i];
                if logged.len() != events.len() || events.iter().zip(logged).any(|(e, l)| event_line(e) != *l) {
                    return Ok(VerifyOutcome::Fail { tick: rec.tick });
                }
            }
            Ok(ReplayLine::End(end)) => {
                if i + 1 != lines.len() {
                    return Err(malformed(i + 2, "content after end record"));
                }
                if end != EndRecord::for_state(&state, end.reason)
                    || (end.reason == EndReason::AllInactive) != state.all_inactive()
                {
                    return Ok(VerifyOutcome::Fail { tick: state.tick() });
                }
                return Ok(VerifyOutcome::Pass { ticks: state.tick() });
            }
            Ok(_) => return Ok(VerifyOutcome::Fail { tick: state.tick() + 1 }),
            Err(e) => return Err(malformed(i + 1, e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Role;
    use crate::net::session::{run_session, Mode, SessionConfig};
    use crate::radio::TechId;
    use crate::sim::CharacterProfile;
    use crate::world::MapParams;

    fn log(ticks: u64) -> String {
        let catalog = vec![
            CharacterProfile::new("Alice", Role::Full, [TechId::Wifi, TechId::FiveG]),
            CharacterProfile::new("Bob", Role::Half, [TechId::Wifi, TechId::FiveG]),
        ];
        let mut sc = Scenario::new(21, MapParams::new(24, 24), catalog);
        sc.block_interval_n = 1;
        let config = SessionConfig::with_bots(["courier:4".parse().unwrap()]);
        let mut out = Vec::new();
        run_session(sc, config, Mode::Turbo, ticks, &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn untouched_log_passes() {
        let text = log(300);
        assert_eq!(replay_verify(&text).unwrap(), VerifyOutcome::Pass { ticks: 300 });
        assert_eq!(parse_log(&text).unwrap().len(), text.lines().count());
    }

    #[test]
    fn runs_are_reproducible() {
        assert_eq!(log(200), log(200));
    }

    #[test]
    fn deleted_event_line_fails_at_its_tick() {
        let text = log(200);
        let lines: Vec<&str> = text.lines().collect();
        let (idx, tick) = lines
            .iter()
            .enumerate()
            .find_map(|(i, l)| match serde_json::from_str::<ReplayLine>(l) {
                Ok(ReplayLine::Event(e)) if e.tick == 120 => Some((i, e.tick)),
                _ => None,
            })
            .unwrap();
        let cut: Vec<&str> = lines.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, l)| *l).collect();
        assert_eq!(replay_verify(&cut.join("\n")).unwrap(), VerifyOutcome::Fail { tick });
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(replay_verify(""), Err(NetError::MalformedLog { .. })));
        assert!(matches!(replay_verify("{\"type\":\"end\"}"), Err(NetError::MalformedLog { line: 1, .. })));
        let text = log(20);
        let truncated: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
        assert!(matches!(replay_verify(&truncated.join("\n")), Err(NetError::MalformedLog { .. })));
    }
}
