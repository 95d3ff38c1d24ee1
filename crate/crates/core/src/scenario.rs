//! JSON scenario and snapshot files.
//!
//! Agents are listed in order, so the k-th entry of `agents` is agent
//! `v_k` (1-based) and row/column k of `topology.adjacency`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControllerParams;
use crate::daoop::{OperationParams, DEFAULT_MAX_OUTER_ITERATIONS};
use crate::engine::{Scenario, SimConfig};
use crate::plant::{AgentSpec, Dynamics, Objective, DEFAULT_ECE_DEADBAND};
use crate::topology::Topology;

/// The shipped reference scenario (`scenarios/paper.json`).
pub const REFERENCE_SCENARIO_JSON: &str = include_str!("../scenarios/paper.json");

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Parse(serde_json::Error),
    #[error("schema error: {0}")]
    Schema(serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invariant(#[from] crate::Error),
}

impl From<serde_json::Error> for LoadError {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof | Category::Io => LoadError::Parse(e),
            Category::Data => LoadError::Schema(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub adjacency: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub tau: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub dynamics: Dynamics,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationSection {
    pub phi: usize,
    pub psi: f64,
    /// Cadence of the subgraph operation, seconds.
    pub tau_o: f64,
    #[serde(default = "default_outer")]
    pub max_outer_iterations: usize,
    #[serde(default = "default_op_seed")]
    pub rng_seed: u64,
    /// Seeds used by batch runs.
    pub seeds: Vec<u64>,
}

fn default_outer() -> usize {
    DEFAULT_MAX_OUTER_ITERATIONS
}

fn default_op_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: f64,
    pub base_dt: f64,
    pub epsilon_converge: f64,
    #[serde(default = "default_deadband")]
    pub ece_deadband: f64,
    pub init_state_range: [f64; 2],
    pub init_control_range: [f64; 2],
}

fn default_deadband() -> f64 {
    DEFAULT_ECE_DEADBAND
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologySection,
    pub agents: Vec<AgentSection>,
    pub controller: ControllerParams,
    pub operation: OperationSection,
    pub sim: SimSection,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.to_scenario()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn reference() -> Self {
        Self::from_json(REFERENCE_SCENARIO_JSON).expect("shipped scenario is valid")
    }

    /// Builds and validates the runtime scenario.
    pub fn to_scenario(&self) -> crate::Result<Scenario> {
        let topology = Topology::new(self.topology.adjacency.clone())?;
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let spec = AgentSpec {
                    number: k + 1,
                    tau: a.tau,
                    u_min: a.u_min,
                    u_max: a.u_max,
                    dynamics: a.dynamics,
                    objective: a.objective,
                };
                spec.validate().map(|_| spec)
            })
            .collect::<crate::Result<Vec<_>>>()?;
        let op = &self.operation;
        if op.seeds.is_empty() {
            return Err(crate::Error::param("operation.seeds", "at least one seed required"));
        }
        let scenario = Scenario {
            topology,
            agents,
            controller: self.controller.clone(),
            operation: OperationParams {
                phi: op.phi,
                psi: op.psi,
                max_outer_iterations: op.max_outer_iterations,
                rng_seed: op.rng_seed,
            },
            sim: SimConfig {
                horizon: self.sim.horizon,
                base_dt: self.sim.base_dt,
                tau_o: op.tau_o,
                epsilon_converge: self.sim.epsilon_converge,
                ece_deadband: self.sim.ece_deadband,
                init_state_range: self.sim.init_state_range,
                init_control_range: self.sim.init_control_range,
            },
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn seeds(&self) -> &[u64] {
        &self.operation.seeds
    }
}

/// Topology plus an ECE snapshot, for offline subgraph extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub adjacency: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    #[serde(default)]
    pub phi: Option<usize>,
    #[serde(default)]
    pub psi: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub max_outer_iterations: Option<usize>,
}

impl Snapshot {
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        let snap: Snapshot = serde_json::from_str(text)?;
        let topo = Topology::new(snap.adjacency.clone())?;
        if snap.r.len() != topo.n() {
            return Err(crate::Error::DimensionMismatch {
                expected: topo.n(),
                got: snap.r.len(),
            }
            .into());
        }
        if let Some(k) = snap.r.iter().position(|v| !v.is_finite()) {
            return Err(crate::Error::param(format!("r[{}]", k + 1), "must be finite").into());
        }
        Ok(snap)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn topology(&self) -> Topology {
        Topology::new(self.adjacency.clone()).expect("validated on load")
    }
}
