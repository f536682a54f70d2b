use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::Role;
use crate::net::replay::{parse_log, ReplayLine, SpawnRecord};
use crate::net::NetError;
use crate::sim::score::validated_per_minute;
use crate::sim::scenario::micros_to_units;
use crate::sim::{EventKind, NodeScore, Scenario};

/// Series sample spacing in ticks.
pub const SERIES_STEP: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub tick: u64,
    pub chain_length: u64,
    pub active_nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: Scenario,
    pub ticks: u64,
    pub chain_length: u64,
    pub nodes: Vec<NodeScore>,
    pub series: Vec<SeriesPoint>,
    pub validated_per_minute: f64,
    pub mean_time_to_validation: f64,
    /// Sum over nodes, micro-units.
    pub energy_remaining: i64,
}

#[derive(Default)]
struct Tally {
    chain_length: u64,
    active: u64,
    gap_sum: u64,
}

/// Derives the report from a replay log alone.
pub fn export_metrics(log: &str) -> Result<MetricsReport, NetError> {
    let lines = parse_log(log)?;
    let Some(ReplayLine::Header(header)) = lines.first() else {
        return Err(NetError::MalformedLog { line: 1, reason: "first line is not a header".into() });
    };
    let scenario = header.scenario.clone();
    let costs = scenario.energy.costs().map_err(|e| NetError::ScenarioInvalid(e.to_string()))?;
    let weights = scenario.scoring;
    let mut nodes: Vec<NodeScore> = Vec::new();
    let mut tally = Tally::default();
    let mut series = Vec::new();
    let mut ticks = None;

    let add = |nodes: &mut Vec<NodeScore>, tally: &mut Tally, spawns: &[SpawnRecord], line: usize| {
        for s in spawns {
            let role = scenario.profile(&s.profile).map(|p| p.role).ok_or_else(|| NetError::MalformedLog {
                line,
                reason: format!("unknown profile {}", s.profile),
            })?;
            nodes.push(NodeScore {
                node: s.node,
                character: s.character.clone(),
                role,
                blocks_created_validated: 0,
                blocks_mined: 0,
                points: 0,
                energy_remaining: costs.initial,
            });
            tally.active += 1;
        }
        Ok::<_, NetError>(())
    };
    add(&mut nodes, &mut tally, &header.spawns, 1)?;

    let mut current = 0;
    let sample = |series: &mut Vec<SeriesPoint>, tally: &Tally, tick: u64| {
        if tick > 0 && tick.is_multiple_of(SERIES_STEP) {
            series.push(SeriesPoint { tick, chain_length: tally.chain_length, active_nodes: tally.active });
        }
    };
    for (i, line) in lines.iter().enumerate().skip(1) {
        let node = |nodes: &mut Vec<NodeScore>, id: crate::chain::NodeId| {
            let at = id.0 as usize;
            if at < nodes.len() {
                Ok(at)
            } else {
                Err(NetError::MalformedLog { line: i + 1, reason: format!("event for unknown node {id}") })
            }
        };
        match line {
            ReplayLine::Tick(rec) => {
                sample(&mut series, &tally, current);
                current = rec.tick;
                add(&mut nodes, &mut tally, &rec.spawns, i + 1)?;
            }
            ReplayLine::Event(e) => match &e.kind {
                EventKind::BlockAppended { creator, miner, created_tick, .. } => {
                    let c = node(&mut nodes, *creator)?;
                    nodes[c].blocks_created_validated += 1;
                    let m = node(&mut nodes, *miner)?;
                    nodes[m].blocks_mined += 1;
                    tally.chain_length += 1;
                    tally.gap_sum += e.tick - created_tick;
                }
                EventKind::EnergyCharged { node: id, applied, .. } => {
                    let n = node(&mut nodes, *id)?;
                    nodes[n].energy_remaining -= applied;
                }
                EventKind::EnergyDepleted { .. } => tally.active -= 1,
                _ => {}
            },
            ReplayLine::End(end) => {
                sample(&mut series, &tally, current);
                ticks = Some(end.tick);
            }
            ReplayLine::Header(_) => {
                return Err(NetError::MalformedLog { line: i + 1, reason: "second header".into() });
            }
        }
    }
    let ticks = ticks.ok_or(NetError::MalformedLog { line: lines.len(), reason: "missing end record".into() })?;
    for n in &mut nodes {
        n.points = weights.create as u64 * n.blocks_created_validated + weights.mine as u64 * n.blocks_mined;
    }
    Ok(MetricsReport {
        scenario,
        ticks,
        chain_length: tally.chain_length,
        energy_remaining: nodes.iter().map(|n| n.energy_remaining).sum(),
        validated_per_minute: validated_per_minute(tally.chain_length, ticks),
        mean_time_to_validation: if tally.chain_length == 0 {
            0.0
        } else {
            tally.gap_sum as f64 / tally.chain_length as f64
        },
        nodes,
        series,
    })
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::Full => "full",
        Role::Half => "half",
    }
}

impl MetricsReport {
    /// Per-node rows: `node_id,character,role,blocks_created_validated,blocks_mined,points,energy_remaining`.
    pub fn nodes_csv(&self) -> Result<String, NetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["node_id", "character", "role", "blocks_created_validated", "blocks_mined", "points", "energy_remaining"])?;
        for n in &self.nodes {
            w.write_record([
                n.node.0.to_string(),
                n.character.clone(),
                role_name(n.role).to_owned(),
                n.blocks_created_validated.to_string(),
                n.blocks_mined.to_string(),
                n.points.to_string(),
                format!("{:.6}", micros_to_units(n.energy_remaining)),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
    }

    /// `tick,chain_length,active_nodes` every [`SERIES_STEP`] ticks.
    pub fn series_csv(&self) -> Result<String, NetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.series {
            w.serialize(p)?;
        }
        if self.series.is_empty() {
            w.write_record(["tick", "chain_length", "active_nodes"])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
    }

    /// Writes `path` and a sibling `<stem>_series.csv`; returns both paths.
    pub fn write_csv(&self, path: &Path) -> Result<(PathBuf, PathBuf), NetError> {
        std::fs::write(path, self.nodes_csv()?)?;
        let series = series_path(path);
        std::fs::write(&series, self.series_csv()?)?;
        Ok((path.to_owned(), series))
    }
}

pub fn series_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "metrics".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_series.csv"))
}
