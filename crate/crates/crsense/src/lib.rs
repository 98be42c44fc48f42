//! Collaborative multi-band spectrum sensing for cognitive radio:
//! a two-stage epsilon-greedy sensing policy (throughput-driven band
//! selection plus energy-minimizing sensor assignment under miss-detection
//! constraints), its baselines, convergence analysis, and a time-slotted
//! simulation harness.

pub mod analysis;
pub mod assignment;
pub mod channel;
pub mod cli;
pub mod config;
pub mod detection;
pub mod error;
pub mod policy;
pub mod sim;

pub use error::{Error, Result};
