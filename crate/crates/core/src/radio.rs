//! Radio propagation and link feasibility.
//!
//! Path loss follows a log-distance model referenced to 10 m with a
//! per-geography exponent, plus a fixed penalty for every obstacle tile on
//! the line of sight. Direct radios (Bluetooth, Wi-Fi) close a link when the
//! budget between the two devices is non-negative; infrastructure radios
//! (3G, 5G) link any two nodes that are both inside some station's coverage.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Geography, ObstacleKind, TileCoord, World, TILE_METERS};

/// Reference distance for `ref_loss_pl0`, in meters.
pub const REFERENCE_DISTANCE_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechId {
    Bluetooth,
    Wifi,
    ThreeG,
    FiveG,
}

impl TechId {
    pub const ALL: [TechId; 4] = [TechId::Bluetooth, TechId::Wifi, TechId::ThreeG, TechId::FiveG];

    pub fn mode(self) -> LinkMode {
        match self {
            TechId::Bluetooth | TechId::Wifi => LinkMode::Direct,
            TechId::ThreeG | TechId::FiveG => LinkMode::Infrastructure,
        }
    }

    pub fn is_infrastructure(self) -> bool {
        self.mode() == LinkMode::Infrastructure
    }

    pub(crate) fn glyph(self) -> char {
        match self {
            TechId::Bluetooth => 'b',
            TechId::Wifi => 'w',
            TechId::ThreeG => '3',
            TechId::FiveG => '5',
        }
    }
}

impl fmt::Display for TechId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TechId::Bluetooth => "Bluetooth",
            TechId::Wifi => "Wi-Fi",
            TechId::ThreeG => "3G",
            TechId::FiveG => "5G",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    Direct,
    Infrastructure,
}

/// Link-budget parameters of one radio technology.
///
/// For infrastructure technologies `tx_power` is the base-station power and
/// `sensitivity` the handset's receive threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioTech {
    pub tx_power: f64,
    pub sensitivity: f64,
    pub ref_loss_pl0: f64,
}

impl RadioTech {
    pub fn default_for(id: TechId) -> Self {
        let (tx_power, sensitivity) = match id {
            TechId::Bluetooth => (0.0, -90.0),
            TechId::Wifi => (20.0, -85.0),
            TechId::ThreeG => (43.0, -110.0),
            TechId::FiveG => (40.0, -100.0),
        };
        Self { tx_power, sensitivity, ref_loss_pl0: 40.0 }
    }

    /// A link at the reference distance must always close.
    pub fn validate(&self, id: TechId) -> Result<(), RadioError> {
        let finite = [self.tx_power, self.sensitivity, self.ref_loss_pl0]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.ref_loss_pl0 < 0.0 || self.sensitivity >= self.tx_power - self.ref_loss_pl0 {
            return Err(RadioError::InvalidTech(id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadioOverride {
    tx_power: Option<f64>,
    sensitivity: Option<f64>,
    ref_loss_pl0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RadioTableDoc {
    bluetooth: RadioOverride,
    wifi: RadioOverride,
    three_g: RadioOverride,
    five_g: RadioOverride,
}

/// Parameters for every technology; partial overrides fall back to defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "RadioTableDoc")]
pub struct RadioTable {
    pub bluetooth: RadioTech,
    pub wifi: RadioTech,
    pub three_g: RadioTech,
    pub five_g: RadioTech,
}

impl From<RadioTableDoc> for RadioTable {
    fn from(doc: RadioTableDoc) -> Self {
        let resolve = |id: TechId, o: RadioOverride| {
            let d = RadioTech::default_for(id);
            RadioTech {
                tx_power: o.tx_power.unwrap_or(d.tx_power),
                sensitivity: o.sensitivity.unwrap_or(d.sensitivity),
                ref_loss_pl0: o.ref_loss_pl0.unwrap_or(d.ref_loss_pl0),
            }
        };
        Self {
            bluetooth: resolve(TechId::Bluetooth, doc.bluetooth),
            wifi: resolve(TechId::Wifi, doc.wifi),
            three_g: resolve(TechId::ThreeG, doc.three_g),
            five_g: resolve(TechId::FiveG, doc.five_g),
        }
    }
}

impl Default for RadioTable {
    fn default() -> Self {
        RadioTableDoc::default().into()
    }
}

impl RadioTable {
    pub fn get(&self, id: TechId) -> &RadioTech {
        match id {
            TechId::Bluetooth => &self.bluetooth,
            TechId::Wifi => &self.wifi,
            TechId::ThreeG => &self.three_g,
            TechId::FiveG => &self.five_g,
        }
    }

    pub fn get_mut(&mut self, id: TechId) -> &mut RadioTech {
        match id {
            TechId::Bluetooth => &mut self.bluetooth,
            TechId::Wifi => &mut self.wifi,
            TechId::ThreeG => &mut self.three_g,
            TechId::FiveG => &mut self.five_g,
        }
    }

    pub fn validate(&self) -> Result<(), RadioError> {
        TechId::ALL.iter().try_for_each(|id| self.get(*id).validate(*id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeographyExponents {
    pub urban: f64,
    pub rural: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleLoss {
    pub building: f64,
    pub car: f64,
}

impl ObstacleLoss {
    pub fn of(&self, kind: ObstacleKind) -> f64 {
        match kind {
            ObstacleKind::Building => self.building,
            ObstacleKind::Car => self.car,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationEnv {
    #[serde(default = "PropagationEnv::default_exponent")]
    pub exponent: GeographyExponents,
    #[serde(default = "PropagationEnv::default_obstacle_loss")]
    pub obstacle_loss: ObstacleLoss,
}

impl Default for PropagationEnv {
    fn default() -> Self {
        Self {
            exponent: Self::default_exponent(),
            obstacle_loss: Self::default_obstacle_loss(),
        }
    }
}

impl PropagationEnv {
    fn default_exponent() -> GeographyExponents {
        GeographyExponents { urban: 3.5, rural: 2.7 }
    }

    fn default_obstacle_loss() -> ObstacleLoss {
        ObstacleLoss { building: 15.0, car: 3.0 }
    }

    pub fn exponent_for(&self, geography: Geography) -> f64 {
        match geography {
            Geography::Urban => self.exponent.urban,
            Geography::Rural => self.exponent.rural,
        }
    }

    pub fn validate(&self) -> Result<(), RadioError> {
        let e = self.exponent;
        let l = self.obstacle_loss;
        if !(e.urban >= 2.0 && e.rural >= 2.0 && e.urban.is_finite() && e.rural.is_finite()) {
            return Err(RadioError::InvalidEnv("path-loss exponents must be >= 2.0".into()));
        }
        if !(l.building >= 0.0 && l.car >= 0.0 && l.building.is_finite() && l.car.is_finite()) {
            return Err(RadioError::InvalidEnv("obstacle losses must be >= 0".into()));
        }
        Ok(())
    }

    /// Resolves the path-loss model for one technology on one map.
    pub fn model(&self, geography: Geography, tech: &RadioTech) -> PathLossModel {
        PathLossModel {
            ref_loss_db: tech.ref_loss_pl0,
            exponent: self.exponent_for(geography),
            obstacle_loss: self.obstacle_loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub ref_loss_db: f64,
    pub exponent: f64,
    pub obstacle_loss: ObstacleLoss,
}

impl PathLossModel {
    /// Path loss in dB. Distances under 10 m are clamped to the reference,
    /// and `penetration_bonus` is subtracted from each obstacle's loss
    /// (never below zero).
    pub fn path_loss_db(&self, distance_m: f64, obstacles: &[ObstacleKind], penetration_bonus: f64) -> f64 {
        let d = distance_m.max(REFERENCE_DISTANCE_M);
        let spreading = 10.0 * self.exponent * (d / REFERENCE_DISTANCE_M).log10();
        let blocked: f64 = obstacles
            .iter()
            .map(|k| (self.obstacle_loss.of(*k) - penetration_bonus).max(0.0))
            .sum();
        self.ref_loss_db + spreading + blocked
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("node does not own a {0} radio")]
    TechNotOwned(TechId),
    #[error("{0} is a direct-mode technology and has no coverage")]
    DirectModeTech(TechId),
    #[error("node has no radios")]
    NoRadios,
    #[error("{0} parameters violate sensitivity < tx_power - ref_loss_pl0")]
    InvalidTech(TechId),
    #[error("invalid propagation environment: {0}")]
    InvalidEnv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkVerdict {
    pub usable: bool,
    /// Received power minus sensitivity, in dB. For infrastructure links
    /// this is the weaker endpoint's coverage margin.
    pub margin: f64,
    pub tech: TechId,
}

impl LinkVerdict {
    fn from_margin(tech: TechId, margin: f64) -> Self {
        Self { usable: margin >= 0.0, margin, tech }
    }
}

/// The radio-relevant view of a node.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioEndpoint {
    pub pos: TileCoord,
    pub radios: BTreeSet<TechId>,
    pub penetration_bonus: f64,
}

impl RadioEndpoint {
    pub fn new(pos: TileCoord, radios: impl IntoIterator<Item = TechId>, penetration_bonus: f64) -> Self {
        Self { pos, radios: radios.into_iter().collect(), penetration_bonus }
    }

    pub fn owns(&self, tech: TechId) -> bool {
        self.radios.contains(&tech)
    }
}

/// Best station margin per tile for each infrastructure technology.
#[derive(Debug, Clone, PartialEq)]
struct CoverageMap {
    width: u32,
    three_g: Vec<f64>,
    five_g: Vec<f64>,
}

/// Everything needed to evaluate links on one map.
///
/// Station coverage is static, so it is computed once per tile on
/// construction and looked up afterwards.
#[derive(Debug, Clone)]
pub struct RadioContext {
    world: Arc<World>,
    env: PropagationEnv,
    radios: RadioTable,
    coverage: CoverageMap,
}

impl RadioContext {
    pub fn new(world: Arc<World>, env: PropagationEnv, radios: RadioTable) -> Self {
        let width = world.width();
        let mut ctx = Self {
            world,
            env,
            radios,
            coverage: CoverageMap { width, three_g: Vec::new(), five_g: Vec::new() },
        };
        let (w, h) = (ctx.world.width(), ctx.world.height());
        for tech in [TechId::ThreeG, TechId::FiveG] {
            let mut grid = Vec::with_capacity(w as usize * h as usize);
            for y in 0..h {
                for x in 0..w {
                    grid.push(ctx.station_margin(TileCoord::new(x, y), tech));
                }
            }
            match tech {
                TechId::ThreeG => ctx.coverage.three_g = grid,
                _ => ctx.coverage.five_g = grid,
            }
        }
        ctx
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_arc(&self) -> &Arc<World> {
        &self.world
    }

    pub fn env(&self) -> &PropagationEnv {
        &self.env
    }

    pub fn radios(&self) -> &RadioTable {
        &self.radios
    }

    pub fn model(&self, tech: TechId) -> PathLossModel {
        self.env.model(self.world.geography(), self.radios.get(tech))
    }

    /// Best margin over all stations of `tech`, recomputed from scratch.
    /// Negative infinity when the map has no such station.
    pub fn station_margin(&self, pos: TileCoord, tech: TechId) -> f64 {
        let params = self.radios.get(tech);
        let model = self.model(tech);
        self.world
            .stations()
            .iter()
            .filter(|s| s.tech == tech)
            .filter_map(|s| {
                let obstacles = self.world.obstacles_between(pos, s.pos).ok()?;
                let loss = model.path_loss_db(pos.distance_m(s.pos), &obstacles, 0.0);
                Some(s.tx_power - loss - params.sensitivity)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cached coverage margin; negative infinity off-map.
    pub fn coverage_margin(&self, pos: TileCoord, tech: TechId) -> Result<f64, RadioError> {
        let grid = match tech {
            TechId::ThreeG => &self.coverage.three_g,
            TechId::FiveG => &self.coverage.five_g,
            other => return Err(RadioError::DirectModeTech(other)),
        };
        if !self.world.in_bounds(pos) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(grid[pos.y as usize * self.coverage.width as usize + pos.x as usize])
    }

    pub fn coverage(&self, pos: TileCoord, tech: TechId) -> Result<bool, RadioError> {
        Ok(self.coverage_margin(pos, tech)? >= 0.0)
    }

    pub fn link_up(&self, a: &RadioEndpoint, b: &RadioEndpoint, tech: TechId) -> Result<LinkVerdict, RadioError> {
        if !a.owns(tech) || !b.owns(tech) {
            return Err(RadioError::TechNotOwned(tech));
        }
        let margin = match tech.mode() {
            LinkMode::Direct => {
                let params = self.radios.get(tech);
                let obstacles = self.world.obstacles_between(a.pos, b.pos).unwrap_or_default();
                // the better-shielded side sets the penetration bonus, which keeps the verdict symmetric
                let bonus = a.penetration_bonus.max(b.penetration_bonus);
                let loss = self.model(tech).path_loss_db(a.pos.distance_m(b.pos), &obstacles, bonus);
                params.tx_power - loss - params.sensitivity
            }
            LinkMode::Infrastructure => {
                self.coverage_margin(a.pos, tech)?.min(self.coverage_margin(b.pos, tech)?)
            }
        };
        Ok(LinkVerdict::from_margin(tech, margin))
    }

    /// Best usable link between two endpoints, scanning shared techs in
    /// canonical order and keeping the first usable one.
    pub fn first_usable_link(&self, a: &RadioEndpoint, b: &RadioEndpoint) -> Option<LinkVerdict> {
        a.radios
            .intersection(&b.radios)
            .filter_map(|t| self.link_up(a, b, *t).ok())
            .find(|v| v.usable)
    }

    /// Fraction of `node`'s radios that are currently usable.
    pub fn connectivity_score<'p>(
        &self,
        node: &RadioEndpoint,
        peers: impl IntoIterator<Item = &'p RadioEndpoint> + Clone,
    ) -> Result<Connectivity, RadioError> {
        if node.radios.is_empty() {
            return Err(RadioError::NoRadios);
        }
        let mut usable = 0;
        for &tech in &node.radios {
            let up = match tech.mode() {
                LinkMode::Infrastructure => self.coverage(node.pos, tech)?,
                LinkMode::Direct => peers
                    .clone()
                    .into_iter()
                    .any(|p| self.link_up(node, p, tech).is_ok_and(|v| v.usable)),
            };
            usable += up as u32;
        }
        Ok(Connectivity { usable, owned: node.radios.len() as u32 })
    }

    /// All usable (pair, tech) links among `nodes`, keyed by slice index.
    pub fn connectivity_graph(&self, nodes: &[RadioEndpoint]) -> ConnectivityGraph {
        let mut edges = BTreeSet::new();
        for tech in TechId::ALL {
            match tech.mode() {
                LinkMode::Infrastructure => {
                    let covered: Vec<usize> = (0..nodes.len())
                        .filter(|i| nodes[*i].owns(tech) && self.coverage(nodes[*i].pos, tech).unwrap_or(false))
                        .collect();
                    for (k, &i) in covered.iter().enumerate() {
                        for &j in &covered[k + 1..] {
                            edges.insert(Edge { a: i, b: j, tech });
                        }
                    }
                }
                LinkMode::Direct => {
                    for i in 0..nodes.len() {
                        for j in i + 1..nodes.len() {
                            if self.link_up(&nodes[i], &nodes[j], tech).is_ok_and(|v| v.usable) {
                                edges.insert(Edge { a: i, b: j, tech });
                            }
                        }
                    }
                }
            }
        }
        ConnectivityGraph { nodes: nodes.len(), edges }
    }
}

/// Owned vs. usable radio count for one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub usable: u32,
    pub owned: u32,
}

impl Connectivity {
    pub fn fraction(&self) -> f64 {
        if self.owned == 0 {
            0.0
        } else {
            self.usable as f64 / self.owned as f64
        }
    }
}

/// Undirected edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub tech: TechId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConnectivityGraph {
    nodes: usize,
    edges: BTreeSet<Edge>,
}

impl ConnectivityGraph {
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize, tech: TechId) -> bool {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        self.edges.contains(&Edge { a, b, tech })
    }

    /// Neighbors of `i` on any technology, ascending and deduplicated.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .edges
            .iter()
            .filter_map(|e| match (e.a == i, e.b == i) {
                (true, _) => Some(e.b),
                (_, true) => Some(e.a),
                _ => None,
            })
            .collect();
        set.into_iter().collect()
    }
}

/// Coverage radius in meters of a station over open ground, where the margin reaches zero.
pub fn open_ground_range_m(model: &PathLossModel, tx_power: f64, sensitivity: f64) -> f64 {
    let budget = tx_power - sensitivity - model.ref_loss_db;
    REFERENCE_DISTANCE_M * 10f64.powf(budget / (10.0 * model.exponent))
}

/// Same as [`open_ground_range_m`] in whole tiles.
pub fn open_ground_range_tiles(model: &PathLossModel, tx_power: f64, sensitivity: f64) -> f64 {
    open_ground_range_m(model, tx_power, sensitivity) / TILE_METERS
}
