//! Discrete-event simulator for mobile-initiated, AP-assisted load-balancing
//! handoff in an 802.11 ESS with an optional WMAN overlay.

pub mod config;
pub mod detection;
pub mod engine;
pub mod handoff;
pub mod metrics;
pub mod network;
pub mod scanning;
pub mod vertical;
pub mod world;

pub use config::{build_standard_scenario, CasePreset, ConfigError, ScenarioConfig};
pub use engine::{Scheduler, SimTime};
