//! A deterministic game simulator of a proof-of-work blockchain running on
//! top of a mobile wireless network.
//!
//! Players (or bots) steer characters along the roads of a randomized tile
//! map. Blocks appear at random characters every few seconds and must be
//! carried, over whatever radio links are available, to a full node that can
//! mine them onto the chain. Everything is driven by a fixed-rate tick loop
//! and a seeded generator, so any round can be replayed bit for bit.
//!
//! - [`world`]: procedural road maps, obstacles and base stations
//! - [`radio`]: path loss, coverage and link feasibility
//! - [`chain`]: blocks, proof-of-work and the chain itself
//! - [`sim`]: scenarios, the tick loop, energy and scoring
//! - [`net`]: multiplayer sessions, bots, replay logs and metrics

pub mod chain;
pub mod net;
pub mod radio;
pub mod rng;
pub mod sim;
pub mod world;
