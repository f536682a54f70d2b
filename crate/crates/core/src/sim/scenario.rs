//! Scenario documents: one round's full parameterization, as JSON.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Role, Target};
use crate::radio::{PropagationEnv, RadioTable, TechId};
use crate::world::MapParams;

/// Simulation ticks per second. Fixed; scenarios may only restate it.
pub const TICK_RATE: u32 = 10;

/// Energy is tracked in millionths of a unit so the ledger is exact.
pub const ENERGY_SCALE: i64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error("{field}: {constraint}")]
    ValidationError { field: String, constraint: String },
}

fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> ScenarioError {
    ScenarioError::ValidationError { field: field.into(), constraint: constraint.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default = "defaults::tick_rate")]
    pub tick_rate: u32,
    /// Seconds between block generations.
    #[serde(default = "defaults::block_interval")]
    pub block_interval_n: u32,
    #[serde(default = "defaults::difficulty")]
    pub difficulty_bits: u32,
    #[serde(default = "defaults::expiry")]
    pub expiry_ticks: u64,
    pub map: MapParams,
    #[serde(default)]
    pub env: PropagationEnv,
    #[serde(default)]
    pub radios: RadioTable,
    #[serde(default)]
    pub energy: EnergyParams,
    #[serde(default)]
    pub scoring: ScoringWeights,
    pub catalog: Vec<CharacterProfile>,
}

mod defaults {
    pub fn tick_rate() -> u32 {
        super::TICK_RATE
    }
    pub fn block_interval() -> u32 {
        5
    }
    pub fn difficulty() -> u32 {
        8
    }
    pub fn expiry() -> u64 {
        3000
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    pub initial: f64,
    pub idle_cost: f64,
    pub move_cost: f64,
    pub transmit_cost: f64,
    pub hash_cost: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self { initial: 1000.0, idle_cost: 0.1, move_cost: 1.0, transmit_cost: 5.0, hash_cost: 0.01 }
    }
}

/// [`EnergyParams`] converted to integer micro-units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyCosts {
    pub initial: i64,
    pub idle: i64,
    pub movement: i64,
    pub transmit: i64,
    pub hash: i64,
}

/// Converts a unit amount to micro-units, refusing values that are not
/// representable to the micro-unit.
pub fn to_micros(value: f64) -> Option<i64> {
    let scaled = value * ENERGY_SCALE as f64;
    if !scaled.is_finite() || scaled.abs() > 1e15 {
        return None;
    }
    let rounded = scaled.round();
    ((scaled - rounded).abs() < 1e-3).then_some(rounded as i64)
}

pub fn micros_to_units(micros: i64) -> f64 {
    micros as f64 / ENERGY_SCALE as f64
}

impl EnergyParams {
    pub fn costs(&self) -> Result<EnergyCosts, ScenarioError> {
        let conv = |name: &str, v: f64| {
            if v.is_nan() || v < 0.0 {
                return Err(invalid(format!("energy.{name}"), "must be >= 0"));
            }
            to_micros(v).ok_or_else(|| invalid(format!("energy.{name}"), "must be a multiple of 0.000001"))
        };
        let costs = EnergyCosts {
            initial: conv("initial", self.initial)?,
            idle: conv("idle_cost", self.idle_cost)?,
            movement: conv("move_cost", self.move_cost)?,
            transmit: conv("transmit_cost", self.transmit_cost)?,
            hash: conv("hash_cost", self.hash_cost)?,
        };
        if costs.initial <= 0 {
            return Err(invalid("energy.initial", "must be > 0"));
        }
        Ok(costs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringWeights {
    pub create: u32,
    pub mine: u32,
}

impl Default for ScoringWeights {
    fn default() -> Self {
        Self { create: 1, mine: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ProfileDoc")]
pub struct CharacterProfile {
    pub name: String,
    pub role: Role,
    pub radios: BTreeSet<TechId>,
    /// Tiles per second.
    pub move_speed: f64,
    /// Hash attempts per tick.
    pub mining_rate: u64,
    /// dB shaved off every obstacle's loss.
    pub penetration_bonus: f64,
    pub can_jump: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    name: String,
    role: Role,
    #[serde(default = "ProfileDoc::default_radios")]
    radios: BTreeSet<TechId>,
    #[serde(default = "ProfileDoc::default_speed")]
    move_speed: f64,
    mining_rate: Option<u64>,
    #[serde(default)]
    penetration_bonus: f64,
    #[serde(default)]
    can_jump: bool,
}

impl ProfileDoc {
    fn default_radios() -> BTreeSet<TechId> {
        BTreeSet::from([TechId::Wifi, TechId::FiveG])
    }

    fn default_speed() -> f64 {
        1.0
    }
}

impl From<ProfileDoc> for CharacterProfile {
    fn from(doc: ProfileDoc) -> Self {
        let mining_rate = doc.mining_rate.unwrap_or(match doc.role {
            Role::Full => CharacterProfile::DEFAULT_MINING_RATE,
            Role::Half => 0,
        });
        Self {
            name: doc.name,
            role: doc.role,
            radios: doc.radios,
            move_speed: doc.move_speed,
            mining_rate,
            penetration_bonus: doc.penetration_bonus,
            can_jump: doc.can_jump,
        }
    }
}

impl CharacterProfile {
    pub const DEFAULT_MINING_RATE: u64 = 32;

    pub fn new(name: impl Into<String>, role: Role, radios: impl IntoIterator<Item = TechId>) -> Self {
        Self {
            name: name.into(),
            role,
            radios: radios.into_iter().collect(),
            move_speed: 1.0,
            mining_rate: if role == Role::Full { Self::DEFAULT_MINING_RATE } else { 0 },
            penetration_bonus: 0.0,
            can_jump: false,
        }
    }

    pub fn validate(&self, at: &str) -> Result<(), ScenarioError> {
        if self.name.trim().is_empty() {
            return Err(invalid(format!("{at}.name"), "must not be empty"));
        }
        if !(self.move_speed > 0.0 && self.move_speed <= 1000.0) {
            return Err(invalid(format!("{at}.move_speed"), "must be in (0, 1000]"));
        }
        if speed_units(self.move_speed) == 0 {
            return Err(invalid(format!("{at}.move_speed"), "must be at least 0.001 tiles/s"));
        }
        match self.role {
            Role::Full if self.mining_rate == 0 => {
                return Err(invalid(format!("{at}.mining_rate"), "must be > 0 for full nodes"))
            }
            Role::Half if self.mining_rate != 0 => {
                return Err(invalid(format!("{at}.mining_rate"), "must be 0 for half nodes"))
            }
            _ => {}
        }
        if self.radios.is_empty() {
            return Err(invalid(format!("{at}.radios"), "must not be empty"));
        }
        if !(self.penetration_bonus >= 0.0 && self.penetration_bonus.is_finite()) {
            return Err(invalid(format!("{at}.penetration_bonus"), "must be >= 0"));
        }
        Ok(())
    }
}

/// Movement credit needed for one tile. A node earns its speed in
/// thousandths of a tile per second on every tick, so at 10 ticks per
/// second one tile costs `1000 * TICK_RATE` units.
pub const TILE_CREDIT: u64 = 1000 * TICK_RATE as u64;

/// Per-tick movement credit for a speed in tiles per second.
pub fn speed_units(move_speed: f64) -> u64 {
    (move_speed * 1000.0).round().max(0.0) as u64
}

impl Scenario {
    /// A scenario with every default applied.
    pub fn new(seed: u64, map: MapParams, catalog: Vec<CharacterProfile>) -> Self {
        Self {
            seed,
            tick_rate: TICK_RATE,
            block_interval_n: defaults::block_interval(),
            difficulty_bits: defaults::difficulty(),
            expiry_ticks: defaults::expiry(),
            map,
            env: PropagationEnv::default(),
            radios: RadioTable::default(),
            energy: EnergyParams::default(),
            scoring: ScoringWeights::default(),
            catalog,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.tick_rate != TICK_RATE {
            return Err(invalid("tick_rate", format!("is fixed at {TICK_RATE}")));
        }
        if self.block_interval_n < 1 {
            return Err(invalid("block_interval_n", "must be >= 1"));
        }
        if self.difficulty_bits > Target::MAX_BITS {
            return Err(invalid("difficulty_bits", "must be <= 256"));
        }
        if self.expiry_ticks < 1 {
            return Err(invalid("expiry_ticks", "must be >= 1"));
        }
        self.map.validate().map_err(|e| invalid("map", e.to_string()))?;
        self.env.validate().map_err(|e| invalid("env", e.to_string()))?;
        self.radios.validate().map_err(|e| invalid("radios", e.to_string()))?;
        self.energy.costs()?;
        if self.catalog.is_empty() {
            return Err(invalid("catalog", "must list at least one character"));
        }
        let mut names = HashSet::new();
        for (i, profile) in self.catalog.iter().enumerate() {
            profile.validate(&format!("catalog[{i}]"))?;
            if !names.insert(profile.name.as_str()) {
                return Err(invalid(format!("catalog[{i}].name"), "duplicate character name"));
            }
        }
        Ok(())
    }

    pub fn target(&self) -> Target {
        Target::from_difficulty(self.difficulty_bits).expect("validated difficulty")
    }

    /// Ticks between block generations.
    pub fn interval_ticks(&self) -> u64 {
        self.block_interval_n as u64 * self.tick_rate as u64
    }

    pub fn profile(&self, name: &str) -> Option<&CharacterProfile> {
        self.catalog.iter().find(|p| p.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::ParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "seed": 7,
        "map": {"width": 16, "height": 16},
        "catalog": [{"name": "Alice", "role": "full"}]
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!(s.block_interval_n, 5);
        assert_eq!(s.difficulty_bits, 8);
        assert_eq!(s.expiry_ticks, 3000);
        assert_eq!(s.tick_rate, 10);
        assert_eq!(s.energy, EnergyParams::default());
        assert_eq!(s.catalog[0].mining_rate, CharacterProfile::DEFAULT_MINING_RATE);
        assert_eq!(s.map.road_density, 0.2);
        let costs = s.energy.costs().unwrap();
        assert_eq!(costs, EnergyCosts { initial: 1_000_000_000, idle: 100_000, movement: 1_000_000, transmit: 5_000_000, hash: 10_000 });
    }

    #[test]
    fn echo_round_trips() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!(load_scenario(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn zero_interval_is_rejected() {
        let doc = MINIMAL.replace("\"seed\": 7,", "\"seed\": 7, \"block_interval_n\": 0,");
        match load_scenario(&doc) {
            Err(ScenarioError::ValidationError { field, .. }) => assert_eq!(field, "block_interval_n"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_field_is_named() {
        let doc = MINIMAL.replace("\"seed\": 7,", "\"seed\": 7, \"difficultyy\": 4,");
        match load_scenario(&doc) {
            Err(ScenarioError::ParseError { message, line, .. }) => {
                assert!(message.contains("difficultyy"), "{message}");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn profile_invariants() {
        let half_miner = MINIMAL.replace(r#""role": "full"}"#, r#""role": "half", "mining_rate": 5}"#);
        assert!(matches!(load_scenario(&half_miner), Err(ScenarioError::ValidationError { .. })));
        let full_idle = MINIMAL.replace(r#""role": "full"}"#, r#""role": "full", "mining_rate": 0}"#);
        assert!(matches!(load_scenario(&full_idle), Err(ScenarioError::ValidationError { .. })));
        let mute = MINIMAL.replace(r#""role": "full"}"#, r#""role": "full", "radios": []}"#);
        assert!(matches!(load_scenario(&mute), Err(ScenarioError::ValidationError { .. })));
        let frozen = MINIMAL.replace(r#""role": "full"}"#, r#""role": "full", "move_speed": 0}"#);
        assert!(matches!(load_scenario(&frozen), Err(ScenarioError::ValidationError { .. })));
        let dup = MINIMAL.replace(
            r#"[{"name": "Alice", "role": "full"}]"#,
            r#"[{"name": "Alice", "role": "full"}, {"name": "Alice", "role": "half"}]"#,
        );
        assert!(matches!(load_scenario(&dup), Err(ScenarioError::ValidationError { .. })));
    }

    #[test]
    fn tick_rate_is_fixed() {
        let doc = MINIMAL.replace("\"seed\": 7,", "\"seed\": 7, \"tick_rate\": 20,");
        assert!(matches!(load_scenario(&doc), Err(ScenarioError::ValidationError { .. })));
    }

    #[test]
    fn energy_must_be_exact_in_micros() {
        assert_eq!(to_micros(0.1), Some(100_000));
        assert_eq!(to_micros(0.01), Some(10_000));
        assert_eq!(to_micros(1e-7), None);
        let doc = MINIMAL.replace("\"seed\": 7,", "\"seed\": 7, \"energy\": {\"initial\": 0},");
        assert!(matches!(load_scenario(&doc), Err(ScenarioError::ValidationError { .. })));
        let doc = MINIMAL.replace("\"seed\": 7,", "\"seed\": 7, \"energy\": {\"idle_cost\": -1},");
        assert!(matches!(load_scenario(&doc), Err(ScenarioError::ValidationError { .. })));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match load_scenario("{\n  \"seed\": ,\n}") {
            Err(ScenarioError::ParseError { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
