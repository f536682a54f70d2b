//! The authoritative tick loop and everything it owns.

pub mod command;
pub mod event;
pub mod scenario;
pub mod score;
pub mod state;

pub use command::{Action, Command, RejectReason, Verdict};
pub use event::{Event, EventKind};
pub use scenario::{load_scenario, CharacterProfile, EnergyParams, Scenario, ScenarioError, TICK_RATE};
pub use score::{score, NodeScore, Scoreboard};
pub use state::{account_energy, Activity, EnergyDelta, NodeState, SimError, SimState};

#[cfg(test)]
mod tests;
