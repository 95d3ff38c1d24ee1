//! Deterministic simulation of consensus/incentive control over a network
//! of heterogeneous agents, with periodic extraction of a critical-agent
//! subgraph.
//!
//! Module map:
//!
//! - [`topology`]: weighted directed agent graph and subgraph views
//! - [`plant`]: agent dynamics, local objectives, ECE estimation
//! - [`control`]: saturated control law, voting weights, stake updates
//! - [`daoop`]: subgraph extraction heuristic, exhaustive oracle, validator
//! - [`engine`]: multi-rate simulation loop, evaluation, batch comparison
//! - [`scenario`]: JSON scenario and snapshot files
//! - [`output`]: CSV/JSON serialization of traces and reports

pub mod control;
pub mod daoop;
pub mod engine;
mod error;
pub mod output;
pub mod plant;
pub mod rng;
pub mod scenario;
pub mod topology;

pub use control::{ControllerParams, Regime};
pub use daoop::{OperationParams, OperationResult};
pub use engine::{run_batch, run_simulation, EvalReport, Scenario, SimConfig, SimTrace};
pub use error::{Error, Result};
pub use plant::{AgentSpec, AgentState, Dynamics, Objective};
pub use scenario::{LoadError, ScenarioConfig, Snapshot};
pub use topology::{Subgraph, Topology};
