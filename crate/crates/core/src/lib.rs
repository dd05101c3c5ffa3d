//! Compressive random access with multiple resource blocks and fast retrial.
//!
//! - [`analysis`]: closed-form stability bounds, the steady-state fixed point,
//!   throughput and delay.
//! - [`csmud`]: per-RB signal synthesis and S-OMP multiuser detection.
//! - [`sim`]: slot-level simulators for the abstract recovery model, the
//!   physical-layer model and a multichannel ALOHA baseline.
//! - [`scenario`]: named experiments writing CSV, metadata and summaries.

pub mod analysis;
pub mod config;
pub mod csmud;
pub mod error;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use config::{validate_config, SystemConfig};
pub use error::{Error, Result};
pub use rng::{derive_stream, Purpose, RngStream};
