//! Simulation of laser logic-state imaging (LLSI) on a synthetic FPGA fabric, Trojan
//! injection into fabric configurations, and golden-vs-suspect snapshot comparison.

pub mod designs;
pub mod detect;
pub mod error;
pub mod fabric;
pub mod logic;
pub mod optics;
pub mod rng;
pub mod snapshot;
pub mod trojan;

pub use error::{DetectError, FabricError, LogicError, OpticsError, SnapshotError, TrojanError};
