//! Tile-based game world: procedural road maps, obstacles and base stations.
//!
//! A [`World`] is generated once per round from a seed and a [`MapParams`]
//! and is immutable afterwards. One tile spans [`TILE_METERS`] on each side
//! and all distances are measured between tile centers.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radio::TechId;
use crate::rng;

/// Edge length of a tile in meters.
pub const TILE_METERS: f64 = 10.0;

/// Attempts [`generate_world`] makes before giving up on connectivity.
pub const GENERATION_ATTEMPTS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TileCoord {
    pub x: u32,
    pub y: u32,
}

impl TileCoord {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    /// Distance between the centers of two tiles, in meters.
    pub fn distance_m(self, other: TileCoord) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        (dx * dx + dy * dy).sqrt() * TILE_METERS
    }

    /// Neighbor one step in `dir`, or `None` if that would leave the
    /// non-negative quadrant. Upper bounds are checked by the world.
    pub fn step(self, dir: Direction, tiles: u32) -> Option<TileCoord> {
        let (dx, dy) = dir.delta();
        let x = self.x as i64 + dx * tiles as i64;
        let y = self.y as i64 + dy * tiles as i64;
        if x < 0 || y < 0 || x > u32::MAX as i64 || y > u32::MAX as i64 {
            return None;
        }
        Some(TileCoord::new(x as u32, y as u32))
    }

    pub fn is_adjacent(self, other: TileCoord) -> bool {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) == 1
    }
}

impl fmt::Display for TileCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Compass direction on the grid. Row 0 is the northern edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    E,
    S,
    W,
}

impl Direction {
    /// Tie-break order used everywhere a choice between neighbors is made.
    pub const ALL: [Direction; 4] = [Direction::N, Direction::E, Direction::S, Direction::W];

    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::N => (0, -1),
            Direction::E => (1, 0),
            Direction::S => (0, 1),
            Direction::W => (-1, 0),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::N => Direction::S,
            Direction::E => Direction::W,
            Direction::S => Direction::N,
            Direction::W => Direction::E,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Building,
    Car,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileKind {
    Road,
    Open,
    Obstacle(ObstacleKind),
}

impl TileKind {
    pub fn is_road(self) -> bool {
        matches!(self, TileKind::Road)
    }

    pub fn obstacle(self) -> Option<ObstacleKind> {
        match self {
            TileKind::Obstacle(kind) => Some(kind),
            _ => None,
        }
    }

    /// Single-character glyph used by [`World::to_ascii`] and [`World::from_ascii`].
    pub fn glyph(self) -> char {
        match self {
            TileKind::Road => '#',
            TileKind::Open => '.',
            TileKind::Obstacle(ObstacleKind::Building) => 'B',
            TileKind::Obstacle(ObstacleKind::Car) => 'c',
        }
    }

    pub fn from_glyph(c: char) -> Option<TileKind> {
        Some(match c {
            '#' => TileKind::Road,
            '.' => TileKind::Open,
            'B' => TileKind::Obstacle(ObstacleKind::Building),
            'c' => TileKind::Obstacle(ObstacleKind::Car),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geography {
    #[default]
    Urban,
    Rural,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub tech: TechId,
    pub pos: TileCoord,
    /// Transmit power in dBm.
    pub tx_power: f64,
}

/// How many base stations of one technology to scatter over the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub tech: TechId,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapParams {
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub geography: Geography,
    #[serde(default = "MapParams::default_road_density")]
    pub road_density: f64,
    #[serde(default = "MapParams::default_obstacle_density")]
    pub obstacle_density: f64,
    #[serde(default = "MapParams::default_stations")]
    pub stations: Vec<StationSpec>,
}

impl MapParams {
    fn default_road_density() -> f64 {
        0.2
    }

    fn default_obstacle_density() -> f64 {
        0.1
    }

    fn default_stations() -> Vec<StationSpec> {
        vec![
            StationSpec { tech: TechId::ThreeG, count: 1 },
            StationSpec { tech: TechId::FiveG, count: 3 },
        ]
    }

    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            geography: Geography::default(),
            road_density: Self::default_road_density(),
            obstacle_density: Self::default_obstacle_density(),
            stations: Self::default_stations(),
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.width < 8 || self.height < 8 {
            return Err(WorldError::InvalidParams(format!(
                "map must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.road_density > 0.0 && self.road_density <= 1.0) {
            return Err(WorldError::InvalidParams(format!(
                "road_density must be in (0, 1], got {}",
                self.road_density
            )));
        }
        if !(self.obstacle_density >= 0.0 && self.obstacle_density < 1.0) {
            return Err(WorldError::InvalidParams(format!(
                "obstacle_density must be in [0, 1), got {}",
                self.obstacle_density
            )));
        }
        for spec in &self.stations {
            if !spec.tech.is_infrastructure() && spec.count > 0 {
                return Err(WorldError::InvalidParams(format!(
                    "base stations must use an infrastructure technology, got {}",
                    spec.tech
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("invalid map parameters: {0}")]
    InvalidParams(String),
    #[error("road network failed the connectivity check after {0} attempts")]
    GenerationFailed(u32),
    #[error("tile {0} is outside the map")]
    OutOfBounds(TileCoord),
    #[error("tile {0} is not a road tile")]
    NotARoadTile(TileCoord),
    #[error("malformed layout: {0}")]
    BadLayout(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    width: u32,
    height: u32,
    tiles: Vec<TileKind>,
    stations: Vec<BaseStation>,
    geography: Geography,
}

impl World {
    /// Builds a world from explicit tiles. The road invariant is checked.
    pub fn from_tiles(
        width: u32,
        height: u32,
        tiles: Vec<TileKind>,
        stations: Vec<BaseStation>,
        geography: Geography,
    ) -> Result<Self, WorldError> {
        if width == 0 || height == 0 || tiles.len() != width as usize * height as usize {
            return Err(WorldError::BadLayout(format!(
                "{} tiles do not fill a {}x{} grid",
                tiles.len(),
                width,
                height
            )));
        }
        let world = Self { width, height, tiles, stations, geography };
        for s in &world.stations {
            world.check_bounds(s.pos)?;
            if !s.tech.is_infrastructure() {
                return Err(WorldError::BadLayout(format!("{} cannot have base stations", s.tech)));
            }
        }
        if world.largest_road_component() < 2 {
            return Err(WorldError::BadLayout("no road component with two or more tiles".into()));
        }
        Ok(world)
    }

    /// Parses rows of glyphs (`#` road, `.` open, `B` building, `c` car).
    pub fn from_ascii(
        rows: &[&str],
        stations: Vec<BaseStation>,
        geography: Geography,
    ) -> Result<Self, WorldError> {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.chars().count()) as u32;
        let mut tiles = Vec::with_capacity((width * height) as usize);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() as u32 != width {
                return Err(WorldError::BadLayout(format!("row {y} has a different width")));
            }
            for c in row.chars() {
                tiles.push(
                    TileKind::from_glyph(c)
                        .ok_or_else(|| WorldError::BadLayout(format!("unknown glyph {c:?}")))?,
                );
            }
        }
        Self::from_tiles(width, height, tiles, stations, geography)
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(((self.width + 1) * self.height) as usize);
        for y in 0..self.height {
            for x in 0..self.width {
                let pos = TileCoord::new(x, y);
                let glyph = match self.stations.iter().find(|s| s.pos == pos) {
                    Some(s) => s.tech.glyph(),
                    None => self.tiles[self.index(pos)].glyph(),
                };
                out.push(glyph);
            }
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn geography(&self) -> Geography {
        self.geography
    }

    pub fn stations(&self) -> &[BaseStation] {
        &self.stations
    }

    pub fn stations_mut(&mut self) -> &mut [BaseStation] {
        &mut self.stations
    }

    pub fn tiles(&self) -> &[TileKind] {
        &self.tiles
    }

    pub fn in_bounds(&self, pos: TileCoord) -> bool {
        pos.x < self.width && pos.y < self.height
    }

    pub fn check_bounds(&self, pos: TileCoord) -> Result<(), WorldError> {
        if self.in_bounds(pos) {
            Ok(())
        } else {
            Err(WorldError::OutOfBounds(pos))
        }
    }

    fn index(&self, pos: TileCoord) -> usize {
        pos.y as usize * self.width as usize + pos.x as usize
    }

    fn coord(&self, index: usize) -> TileCoord {
        TileCoord::new((index % self.width as usize) as u32, (index / self.width as usize) as u32)
    }

    pub fn tile(&self, pos: TileCoord) -> Option<TileKind> {
        self.in_bounds(pos).then(|| self.tiles[self.index(pos)])
    }

    pub fn is_road(&self, pos: TileCoord) -> bool {
        self.tile(pos).is_some_and(TileKind::is_road)
    }

    /// Neighbor in `dir` at `tiles` steps, if it lies on the map.
    pub fn neighbor(&self, pos: TileCoord, dir: Direction, tiles: u32) -> Option<TileCoord> {
        pos.step(dir, tiles).filter(|p| self.in_bounds(*p))
    }

    pub fn road_tiles(&self) -> impl Iterator<Item = TileCoord> + '_ {
        self.tiles
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_road())
            .map(|(i, _)| self.coord(i))
    }

    /// Sizes of the 4-connected road components, largest first.
    pub fn road_components(&self) -> Vec<usize> {
        let mut seen = vec![false; self.tiles.len()];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..self.tiles.len() {
            if seen[start] || !self.tiles[start].is_road() {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut size = 0;
            while let Some(i) = queue.pop_front() {
                size += 1;
                let pos = self.coord(i);
                for dir in Direction::ALL {
                    if let Some(n) = self.neighbor(pos, dir, 1) {
                        let j = self.index(n);
                        if !seen[j] && self.tiles[j].is_road() {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    pub fn largest_road_component(&self) -> usize {
        self.road_components().first().copied().unwrap_or(0)
    }

    /// Tiles strictly between `a` and `b` on the integer line joining them.
    ///
    /// The traversal always runs from the lexicographically smaller endpoint,
    /// so the result is identical for `(a, b)` and `(b, a)`.
    pub fn line_between(&self, a: TileCoord, b: TileCoord) -> Result<Vec<TileCoord>, WorldError> {
        self.check_bounds(a)?;
        self.check_bounds(b)?;
        let (from, to) = if a <= b { (a, b) } else { (b, a) };
        Ok(bresenham(from, to)
            .into_iter()
            .filter(|p| *p != from && *p != to)
            .collect())
    }

    /// Obstacle kinds crossed by the line from `a` to `b`, endpoints excluded.
    pub fn obstacles_between(
        &self,
        a: TileCoord,
        b: TileCoord,
    ) -> Result<Vec<ObstacleKind>, WorldError> {
        Ok(self
            .line_between(a, b)?
            .into_iter()
            .filter_map(|p| self.tiles[self.index(p)].obstacle())
            .collect())
    }

    /// Shortest 4-neighbor path over road tiles, endpoints included.
    ///
    /// Breadth-first search expanding neighbors in N, E, S, W order; the
    /// first discovery of a tile fixes its parent, which settles ties.
    pub fn road_path(
        &self,
        a: TileCoord,
        b: TileCoord,
    ) -> Result<Option<Vec<TileCoord>>, WorldError> {
        for p in [a, b] {
            self.check_bounds(p)?;
            if !self.is_road(p) {
                return Err(WorldError::NotARoadTile(p));
            }
        }
        if a == b {
            return Ok(Some(vec![a]));
        }
        let mut parent = vec![usize::MAX; self.tiles.len()];
        let start = self.index(a);
        let goal = self.index(b);
        parent[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            if i == goal {
                break;
            }
            let pos = self.coord(i);
            for dir in Direction::ALL {
                if let Some(n) = self.neighbor(pos, dir, 1) {
                    let j = self.index(n);
                    if parent[j] == usize::MAX && self.tiles[j].is_road() {
                        parent[j] = i;
                        queue.push_back(j);
                    }
                }
            }
        }
        if parent[goal] == usize::MAX {
            return Ok(None);
        }
        let mut path = vec![b];
        let mut i = goal;
        while i != start {
            i = parent[i];
            path.push(self.coord(i));
        }
        path.reverse();
        Ok(Some(path))
    }

    /// Road distance in steps from `from` to every tile (`None` where unreachable).
    pub fn road_distances(&self, from: TileCoord) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.tiles.len()];
        if !self.is_road(from) {
            return dist;
        }
        let start = self.index(from);
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let d = dist[i].unwrap_or(0);
            let pos = self.coord(i);
            for dir in Direction::ALL {
                if let Some(n) = self.neighbor(pos, dir, 1) {
                    let j = self.index(n);
                    if dist[j].is_none() && self.tiles[j].is_road() {
                        dist[j] = Some(d + 1);
                        queue.push_back(j);
                    }
                }
            }
        }
        dist
    }

    pub fn road_distance_at(&self, table: &[Option<u32>], pos: TileCoord) -> Option<u32> {
        self.tile(pos).and_then(|_| table[self.index(pos)])
    }
}

/// Integer line from `a` to `b`, both endpoints included.
fn bresenham(a: TileCoord, b: TileCoord) -> Vec<TileCoord> {
    let (mut x, mut y) = (a.x as i64, a.y as i64);
    let (x1, y1) = (b.x as i64, b.y as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx - dy + 1) as usize);
    loop {
        out.push(TileCoord::new(x as u32, y as u32));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

/// Generates the randomized geography of a round.
///
/// Roads are carved by a sequence of drunkard's-walk corridors, each new
/// corridor branching off an existing road tile. An attempt fails if the
/// walkers exhaust their step budget before reaching the road quota or the
/// largest component is below `road_density / 2` of the map; up to
/// [`GENERATION_ATTEMPTS`] attempts are made.
pub fn generate_world(seed: u64, params: &MapParams) -> Result<World, WorldError> {
    params.validate()?;
    let mut rng = rng::stream(seed, rng::WORLD_STREAM);
    let area = params.width as usize * params.height as usize;
    let required = (params.road_density / 2.0 * area as f64).ceil() as usize;
    for _ in 0..GENERATION_ATTEMPTS {
        let Some(tiles) = carve_roads(&mut rng, params) else {
            continue;
        };
        let mut world = World {
            width: params.width,
            height: params.height,
            tiles,
            stations: Vec::new(),
            geography: params.geography,
        };
        if world.largest_road_component() < required.max(2) {
            continue;
        }
        scatter_obstacles(&mut world, &mut rng, params.obstacle_density);
        place_stations(&mut world, &mut rng, &params.stations);
        return Ok(world);
    }
    Err(WorldError::GenerationFailed(GENERATION_ATTEMPTS))
}

fn carve_roads(rng: &mut ChaCha8Rng, params: &MapParams) -> Option<Vec<TileKind>> {
    let (w, h) = (params.width, params.height);
    let area = w as usize * h as usize;
    let quota = ((params.road_density * area as f64).ceil() as usize).clamp(2, area);
    let mut tiles = vec![TileKind::Open; area];
    let mut roads: Vec<TileCoord> = Vec::with_capacity(quota);
    let mut budget = 64 * area;
    let corridor = (w.max(h) / 2).max(4);

    let mut pos = TileCoord::new(rng.gen_range(0..w), rng.gen_range(0..h));
    let mut dir = Direction::ALL[rng.gen_range(0..4)];
    let mut left = corridor;
    let idx = |p: TileCoord| p.y as usize * w as usize + p.x as usize;
    tiles[idx(pos)] = TileKind::Road;
    roads.push(pos);

    while roads.len() < quota {
        if budget == 0 {
            return None;
        }
        budget -= 1;
        if left == 0 {
            // branch a new corridor off the existing network
            pos = roads[rng.gen_range(0..roads.len())];
            dir = Direction::ALL[rng.gen_range(0..4)];
            left = rng.gen_range(corridor / 2..=corridor);
        }
        if rng.gen_bool(0.15) {
            dir = Direction::ALL[rng.gen_range(0..4)];
        }
        match pos.step(dir, 1).filter(|p| p.x < w && p.y < h) {
            Some(next) => {
                pos = next;
                left -= 1;
                if !tiles[idx(pos)].is_road() {
                    tiles[idx(pos)] = TileKind::Road;
                    roads.push(pos);
                }
            }
            None => dir = dir.opposite(),
        }
    }
    Some(tiles)
}

fn scatter_obstacles(world: &mut World, rng: &mut ChaCha8Rng, density: f64) {
    if density <= 0.0 {
        return;
    }
    for i in 0..world.tiles.len() {
        if world.tiles[i].is_road() || !rng.gen_bool(density) {
            continue;
        }
        let pos = world.coord(i);
        let roadside = Direction::ALL
            .iter()
            .any(|d| world.neighbor(pos, *d, 1).is_some_and(|n| world.is_road(n)));
        // parked cars line the roads; everything else is a building
        let kind = if roadside && rng.gen_bool(0.3) {
            ObstacleKind::Car
        } else {
            ObstacleKind::Building
        };
        world.tiles[i] = TileKind::Obstacle(kind);
    }
}

fn place_stations(world: &mut World, rng: &mut ChaCha8Rng, specs: &[StationSpec]) {
    let candidates: Vec<TileCoord> = (0..world.tiles.len())
        .filter(|i| world.tiles[*i].obstacle().is_none())
        .map(|i| world.coord(i))
        .collect();
    if candidates.is_empty() {
        return;
    }
    for spec in specs {
        let tx_power = crate::radio::RadioTech::default_for(spec.tech).tx_power;
        for _ in 0..spec.count {
            let pos = candidates[rng.gen_range(0..candidates.len())];
            world.stations.push(BaseStation { tech: spec.tech, pos, tx_power });
        }
    }
}
