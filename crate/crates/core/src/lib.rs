//! Deterministic simulator and decision engine for multi-objective vertical
//! handoffs in heterogeneous overlapping networks.
//!
//! A mobile terminal moves through overlapping coverage discs; candidate
//! networks are evaluated with per-feature log-utility objectives, compared
//! by Pareto dominance and weighted scalarization, and handoffs run through a
//! discover/decide/execute/evaluate pipeline whose outcomes are graded
//! against a radar-style boundary circle.

pub mod context;
pub mod environment;
pub mod error;
pub mod metrics;
pub mod objective;
pub mod pipeline;
pub mod runner;
pub mod scenario;

pub use error::{HandoffError, LoadError};
