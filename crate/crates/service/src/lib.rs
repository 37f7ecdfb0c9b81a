//! Runtime around the phase-state machine: JSON run configs, NDJSON traces,
//! a single-owner stepping session, the built-in figure presets and the
//! WebSocket server.

pub mod config;
pub mod control;
pub mod figures;
pub mod presets;
pub mod protocol;
pub mod server;
pub mod session;
pub mod trace;

pub use config::{ConfigError, Model};
pub use session::{RunError, Session, SimError};
