//! Multi-rate simulation loop, evaluation criteria and batch comparison.
//!
//! Each base step at time `t = k * dt` runs, in order:
//!
//! 1. the subgraph operation, when the regime uses it and `t` is a multiple
//!    of `tau_o`;
//! 2. the decision epochs of every agent whose `tau_i` divides `t`: first
//!    all firing agents sample their ECE, then each runs the control law and
//!    (in incentive regimes) the stake update, in ascending agent order;
//! 3. one explicit-Euler step of every plant under zero-order-held controls.
//!
//! The record for step `k` is taken between 2 and 3.

use serde::{Deserialize, Serialize};

use crate::control::{control_step, incentive_update, ControllerParams, EpochContext, Regime};
use crate::daoop::{operate, validate, OperationParams, SubgraphSummary};
use crate::error::{Error, Result};
use crate::plant::{local_objective, step_dynamics, AgentSpec, AgentState};
use crate::rng::SplitMix64;
use crate::topology::{Subgraph, Topology};

const INIT_STREAM: u64 = 0x696e_6974;
const OPERATION_STREAM: u64 = 0x6f70_6572;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: f64,
    pub base_dt: f64,
    /// Operation cadence.
    pub tau_o: f64,
    /// Convergence threshold relative to the initial max discrepancy.
    pub epsilon_converge: f64,
    #[serde(default = "default_deadband")]
    pub ece_deadband: f64,
    pub init_state_range: [f64; 2],
    pub init_control_range: [f64; 2],
}

fn default_deadband() -> f64 {
    crate::plant::DEFAULT_ECE_DEADBAND
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 500.0,
            base_dt: 0.1,
            tau_o: 5.0,
            epsilon_converge: 0.05,
            ece_deadband: default_deadband(),
            init_state_range: [-20.0, 20.0],
            init_control_range: [-3.0, 3.0],
        }
    }
}

/// Number of base steps in `period`, if it is a positive integer multiple.
fn steps_in(period: f64, dt: f64) -> Option<usize> {
    let ratio = period / dt;
    let rounded = ratio.round();
    (rounded >= 1.0 && (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0)).then_some(rounded as usize)
}

impl SimConfig {
    pub fn step_count(&self) -> usize {
        steps_in(self.horizon, self.base_dt).unwrap_or_else(|| (self.horizon / self.base_dt).floor() as usize)
    }

    /// Exact-decimal time of step `k`.
    pub fn time_of(&self, k: usize) -> f64 {
        (k as f64 * self.base_dt * 1e9).round() / 1e9
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_dt.is_finite() && self.base_dt > 0.0) {
            return Err(Error::param("sim.base_dt", "must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.base_dt) {
            return Err(Error::param("sim.horizon", "must cover at least one base step"));
        }
        if steps_in(self.tau_o, self.base_dt).is_none() {
            return Err(Error::param(
                "operation.tau_o",
                "must be a positive integer multiple of base_dt",
            ));
        }
        if !(self.epsilon_converge.is_finite() && self.epsilon_converge > 0.0) {
            return Err(Error::param("sim.epsilon_converge", "must be positive"));
        }
        if self.ece_deadband.is_nan() || self.ece_deadband < 0.0 {
            return Err(Error::param("sim.ece_deadband", "must be nonnegative"));
        }
        for (field, [lo, hi]) in [
            ("sim.init_state_range", self.init_state_range),
            ("sim.init_control_range", self.init_control_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::param(field, "must be a finite interval [lo, hi]"));
            }
        }
        Ok(())
    }
}

/// Everything a run needs apart from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub agents: Vec<AgentSpec>,
    pub controller: ControllerParams,
    pub operation: OperationParams,
    pub sim: SimConfig,
}

impl Scenario {
    /// The ten-agent reference experiment.
    pub fn reference() -> Self {
        let taus = [10.0, 2.0, 2.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5];
        let agents = taus
            .iter()
            .enumerate()
            .map(|(i, &tau)| AgentSpec::new(i + 1, tau, -3.0, 3.0).expect("valid agent"))
            .collect();
        Self {
            topology: Topology::reference_experiment(),
            agents,
            controller: ControllerParams::default(),
            operation: OperationParams::new(4, 2.0, 1),
            sim: SimConfig::default(),
        }
    }

    pub fn with_regime(&self, regime: Regime) -> Self {
        Self {
            controller: self.controller.with_regime(regime),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.topology.n();
        if self.agents.len() != n {
            return Err(Error::param(
                "agents",
                format!("{} agents listed for a {n}-agent topology", self.agents.len()),
            ));
        }
        for (k, spec) in self.agents.iter().enumerate() {
            if spec.number != k + 1 {
                return Err(Error::param(
                    "agents",
                    format!("agent {} listed at position {}", spec.number, k + 1),
                ));
            }
            spec.validate()?;
            if steps_in(spec.tau, self.sim.base_dt).is_none() {
                return Err(Error::param(
                    format!("agents[{}].tau", spec.number),
                    format!(
                        "{} is not an integer multiple of base_dt {}",
                        spec.tau, self.sim.base_dt
                    ),
                ));
            }
        }
        self.controller.validate()?;
        self.operation.validate()?;
        self.sim.validate()
    }

    fn period_steps(&self) -> Vec<usize> {
        self.agents
            .iter()
            .map(|a| steps_in(a.tau, self.sim.base_dt).expect("validated"))
            .collect()
    }
}

/// Per-seed random initial state and control.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialConditions {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl InitialConditions {
    /// Draws all `x_i` in ascending agent order, then all `u_i`, from a
    /// stream that depends only on the seed.
    pub fn draw(seed: u64, n: usize, sim: &SimConfig) -> Self {
        let mut rng = SplitMix64::derive(seed, INIT_STREAM);
        let [xl, xh] = sim.init_state_range;
        let [ul, uh] = sim.init_control_range;
        let x = (0..n).map(|_| rng.uniform(xl, xh)).collect();
        let u = (0..n).map(|_| rng.uniform(ul, uh)).collect();
        Self { x, u }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgentSnapshot {
    pub x: f64,
    pub u: f64,
    pub d: f64,
    pub gamma: f64,
    pub r: f64,
    pub r_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub agents: Vec<AgentSnapshot>,
    /// Number of subgraph refreshes so far (0 = full graph).
    pub subgraph_epoch: u32,
}

/// Controller internals of one agent epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub t: f64,
    /// 1-based.
    pub agent: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rtilde: f64,
    pub consensus: f64,
    pub h: Option<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Operation {
        t: f64,
        subgraph_epoch: u32,
        subgraph: SubgraphSummary,
        removed_edges: usize,
        restarts: usize,
        constraints_ok: bool,
    },
    OperationInfeasible {
        t: f64,
        restarts: usize,
    },
    WeightClamp {
        t: f64,
        agent: usize,
    },
    Abort {
        t: f64,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub regime: Regime,
    pub seed: u64,
    pub base_dt: f64,
    pub initial: InitialConditions,
    #[serde(skip)]
    pub agents: Vec<AgentSpec>,
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    pub events: Vec<Event>,
}

impl SimTrace {
    pub fn epoch_count(&self, agent: usize) -> usize {
        self.epochs.iter().filter(|e| e.agent == agent).count()
    }

    /// `(found, failed)` operation counts.
    pub fn operation_counts(&self) -> (usize, usize) {
        self.events.iter().fold((0, 0), |(ok, bad), e| match e {
            Event::Operation { .. } => (ok + 1, bad),
            Event::OperationInfeasible { .. } => (ok, bad + 1),
            _ => (ok, bad),
        })
    }

    /// Operations whose subgraph failed the constraint check.
    pub fn constraint_failures(&self) -> usize {
        self.events
            .iter()
            .filter(|e| {
                matches!(
                    e,
                    Event::Operation {
                        constraints_ok: false,
                        ..
                    }
                )
            })
            .count()
    }
}

/// A run stopped by a non-finite quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimAbort {
    pub error: Error,
    pub t: f64,
    pub trace: SimTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// `max |r_i - r_j|` over agents with a defined ECE, per step.
    pub max_discrepancy: Vec<Option<f64>>,
    pub convergence_time: Option<f64>,
    pub consensus_value: Option<f64>,
    pub delta_j: f64,
    pub cumulative_ece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    pub trace: SimTrace,
    pub report: EvalReport,
}

pub fn run_simulation(scenario: &Scenario, seed: u64) -> std::result::Result<SimOutput, Box<SimAbort>> {
    let initial = InitialConditions::draw(seed, scenario.topology.n(), &scenario.sim);
    run_from(scenario, seed, initial)
}

/// Runs from explicit initial conditions.
pub fn run_from(
    scenario: &Scenario,
    seed: u64,
    initial: InitialConditions,
) -> std::result::Result<SimOutput, Box<SimAbort>> {
    let trace = simulate(scenario, seed, initial)?;
    let report = evaluate(&trace, scenario.sim.epsilon_converge);
    Ok(SimOutput { trace, report })
}

fn simulate(
    scenario: &Scenario,
    seed: u64,
    initial: InitialConditions,
) -> std::result::Result<SimTrace, Box<SimAbort>> {
    let topo = &scenario.topology;
    let specs = &scenario.agents;
    let params = &scenario.controller;
    let sim = &scenario.sim;
    let regime = params.regime;
    let n = topo.n();
    let periods = scenario.period_steps();
    let op_period = steps_in(sim.tau_o, sim.base_dt).expect("validated");
    let taus: Vec<f64> = specs.iter().map(|s| s.tau).collect();
    let step_count = sim.step_count();

    let mut states: Vec<AgentState> = initial
        .x
        .iter()
        .zip(&initial.u)
        .map(|(&x, &u)| AgentState::new(x, u))
        .collect();
    let mut active = Subgraph::full(topo);
    let mut subgraph_epoch = 0u32;
    let mut op_rng = SplitMix64::derive(seed, OPERATION_STREAM ^ scenario.operation.rng_seed);

    let mut trace = SimTrace {
        regime,
        seed,
        base_dt: sim.base_dt,
        initial,
        agents: specs.clone(),
        steps: Vec::with_capacity(step_count),
        epochs: Vec::new(),
        events: Vec::new(),
    };

    for k in 0..step_count {
        let t = sim.time_of(k);
        let abort = |trace: SimTrace, error: Error| {
            let mut trace = trace;
            trace.events.push(Event::Abort {
                t,
                reason: error.to_string(),
            });
            Box::new(SimAbort { error, t, trace })
        };

        if regime.operates() && k % op_period == 0 {
            let r: Vec<f64> = states.iter().map(|s| s.r).collect();
            let op_params = OperationParams {
                rng_seed: op_rng.next_u64(),
                ..scenario.operation.clone()
            };
            match operate(topo, &r, &op_params) {
                Ok(res) => match res.subgraph {
                    Some(sub) => {
                        let constraints_ok = validate(topo, &sub, &r, &op_params).all_pass();
                        subgraph_epoch += 1;
                        trace.events.push(Event::Operation {
                            t,
                            subgraph_epoch,
                            subgraph: SubgraphSummary::new(topo, &sub),
                            removed_edges: res.removed_edge_count,
                            restarts: res.iterations_used,
                            constraints_ok,
                        });
                        active = sub;
                    }
                    None => {
                        log::debug!("operation at t={t} infeasible, keeping previous subgraph");
                        trace.events.push(Event::OperationInfeasible {
                            t,
                            restarts: res.iterations_used,
                        });
                    }
                },
                Err(e) => return Err(abort(trace, e)),
            }
        }

        let firing: Vec<usize> = (0..n).filter(|&i| k % periods[i] == 0).collect();
        for &i in &firing {
            let st = &mut states[i];
            let g = local_objective(&specs[i], st.x, st.u);
            let u = st.u;
            st.update_ece(g, u, sim.ece_deadband);
        }
        let r: Vec<f64> = states.iter().map(|s| s.r).collect();
        for &i in &firing {
            let neighbors = if !regime.operates() {
                topo.neighbors(i).expect("index in range")
            } else if active.is_member(i) {
                active.active_neighbors(topo, i)
            } else {
                Vec::new()
            };
            let ctx = EpochContext {
                index: i,
                r: &r,
                tau: &taus,
                neighbors: &neighbors,
                dt_epoch: taus[i],
            };
            let out = match control_step(&specs[i], &states[i], &ctx, params) {
                Ok(out) => out,
                Err(e) => return Err(abort(trace, e)),
            };
            if out.clamped {
                trace.events.push(Event::WeightClamp { t, agent: i + 1 });
            }
            let rtilde_old = states[i].last_rtilde;
            states[i].u = out.u;
            states[i].d = out.d;
            let mut h = None;
            if regime.updates_stake() {
                let deltas: Vec<(f64, f64)> = neighbors
                    .iter()
                    .map(|&(j, a)| (a, states[j].objective_delta()))
                    .collect();
                let inc = incentive_update(states[i].gamma, out.rtilde, rtilde_old, &deltas, params.k3, params.k4);
                if !inc.h.is_finite() {
                    return Err(abort(
                        trace,
                        Error::NonFinite {
                            quantity: "incentive signal",
                            agent: i + 1,
                            value: inc.h,
                        },
                    ));
                }
                states[i].gamma = inc.gamma;
                h = Some(inc.h);
            }
            states[i].last_rtilde = out.rtilde;
            trace.epochs.push(EpochRecord {
                t,
                agent: i + 1,
                alpha: out.alpha,
                beta: out.beta,
                rtilde: out.rtilde,
                consensus: out.consensus,
                h,
                gamma: states[i].gamma,
            });
        }

        trace.steps.push(StepRecord {
            t,
            agents: states
                .iter()
                .map(|s| AgentSnapshot {
                    x: s.x,
                    u: s.u,
                    d: s.d,
                    gamma: s.gamma,
                    r: s.r,
                    r_defined: s.r_defined,
                })
                .collect(),
            subgraph_epoch,
        });

        let u: Vec<f64> = states.iter().map(|s| s.u).collect();
        for i in 0..n {
            let coupled = topo.coupled_input(i, &u).expect("dimensions match");
            let x = step_dynamics(&specs[i], states[i].x, coupled, sim.base_dt);
            if !x.is_finite() {
                return Err(abort(
                    trace,
                    Error::NonFinite {
                        quantity: "state",
                        agent: i + 1,
                        value: x,
                    },
                ));
            }
            states[i].x = x;
        }
    }
    Ok(trace)
}

/// `max |r_i - r_j|` over the defined samples of one step.
pub fn max_discrepancy(agents: &[AgentSnapshot]) -> Option<f64> {
    let defined = agents.iter().filter(|a| a.r_defined).map(|a| a.r);
    let (lo, hi) = defined.fold(None, |acc: Option<(f64, f64)>, r| match acc {
        None => Some((r, r)),
        Some((lo, hi)) => Some((lo.min(r), hi.max(r))),
    })?;
    Some(hi - lo)
}

/// First time after which the discrepancy stays within
/// `epsilon * reference`, where the reference is the first available
/// discrepancy sample. Steps without any defined sample are skipped.
pub fn convergence_time(times: &[f64], series: &[Option<f64>], epsilon: f64) -> Option<f64> {
    let reference = series.iter().flatten().next().copied()?;
    let threshold = epsilon * reference;
    match series.iter().rposition(|s| matches!(s, Some(v) if *v > threshold)) {
        None => times.first().copied(),
        Some(last) => times.get(last + 1).copied(),
    }
}

/// Computes the evaluation criteria of a finished trace.
pub fn evaluate(trace: &SimTrace, epsilon_converge: f64) -> EvalReport {
    let max_discrepancy: Vec<Option<f64>> = trace.steps.iter().map(|s| max_discrepancy(&s.agents)).collect();
    let times: Vec<f64> = trace.steps.iter().map(|s| s.t).collect();
    let convergence_time = convergence_time(&times, &max_discrepancy, epsilon_converge);

    let total_objective = |rec: &StepRecord| -> f64 {
        rec.agents
            .iter()
            .zip(&trace.agents)
            .map(|(a, spec)| local_objective(spec, a.x, a.u))
            .sum()
    };
    let delta_j = match (trace.steps.first(), trace.steps.last()) {
        (Some(first), Some(last)) => total_objective(last) - total_objective(first),
        _ => 0.0,
    };

    let cumulative_ece = trace
        .steps
        .iter()
        .map(|s| trace.base_dt * s.agents.iter().filter(|a| a.r_defined).map(|a| a.r).sum::<f64>())
        .sum();

    let consensus_value = trace.steps.last().and_then(|last| {
        let defined: Vec<f64> = last.agents.iter().filter(|a| a.r_defined).map(|a| a.r).collect();
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
    });

    EvalReport {
        max_discrepancy,
        convergence_time,
        consensus_value,
        delta_j,
        cumulative_ece,
    }
}

/// Median and interquartile range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Spread {
    /// Linear-interpolation quantiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            median: q(0.5),
            q1: q(0.25),
            q3: q(0.75),
        })
    }
}

/// Scalar results of one run in a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub convergence_time: Option<f64>,
    pub consensus_value: Option<f64>,
    pub delta_j: f64,
    pub cumulative_ece: f64,
    pub operations_found: usize,
    pub operations_failed: usize,
    pub constraint_failures: usize,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeSummary {
    pub regime: Regime,
    pub runs: Vec<RunSummary>,
    /// Runs that never converged count as converging at the horizon.
    pub convergence_time: Option<Spread>,
    pub never_converged: usize,
    pub consensus_value: Option<Spread>,
    pub delta_j: Option<Spread>,
    pub abs_delta_j: Option<Spread>,
    pub cumulative_ece: Option<Spread>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub regimes: Vec<RegimeSummary>,
}

impl BatchReport {
    pub fn regime(&self, regime: Regime) -> Option<&RegimeSummary> {
        self.regimes.iter().find(|r| r.regime == regime)
    }
}

/// Result of one (regime, seed) run, keyed for deterministic merging.
pub struct BatchRun {
    pub regime: Regime,
    pub seed: u64,
    pub outcome: std::result::Result<SimOutput, Box<SimAbort>>,
}

/// Runs every (regime, seed) pair, in parallel across threads. Each seed
/// uses the same initial conditions in every regime.
pub fn run_batch_outputs(scenario: &Scenario, regimes: &[Regime], seeds: &[u64]) -> Vec<BatchRun> {
    let jobs: Vec<(Regime, u64)> = regimes
        .iter()
        .flat_map(|&r| seeds.iter().map(move |&s| (r, s)))
        .collect();
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(jobs.len().max(1));
    let mut results: Vec<BatchRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let jobs = &jobs;
                scope.spawn(move || {
                    jobs.iter()
                        .skip(w)
                        .step_by(workers)
                        .map(|&(regime, seed)| BatchRun {
                            regime,
                            seed,
                            outcome: run_simulation(&scenario.with_regime(regime), seed),
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("batch worker panicked"))
            .collect()
    });
    let order = |r: Regime| regimes.iter().position(|&x| x == r);
    let seed_pos = |s: u64| seeds.iter().position(|&x| x == s);
    results.sort_by_key(|run| (order(run.regime), seed_pos(run.seed)));
    results
}

pub fn summarize_run(seed: u64, outcome: &std::result::Result<SimOutput, Box<SimAbort>>) -> RunSummary {
    match outcome {
        Ok(out) => {
            let (found, failed) = out.trace.operation_counts();
            RunSummary {
                seed,
                convergence_time: out.report.convergence_time,
                consensus_value: out.report.consensus_value,
                delta_j: out.report.delta_j,
                cumulative_ece: out.report.cumulative_ece,
                operations_found: found,
                operations_failed: failed,
                constraint_failures: out.trace.constraint_failures(),
                aborted: None,
            }
        }
        Err(abort) => {
            let (found, failed) = abort.trace.operation_counts();
            RunSummary {
                seed,
                convergence_time: None,
                consensus_value: None,
                delta_j: f64::NAN,
                cumulative_ece: f64::NAN,
                operations_found: found,
                operations_failed: failed,
                constraint_failures: abort.trace.constraint_failures(),
                aborted: Some(abort.error.to_string()),
            }
        }
    }
}

pub fn summarize_batch(horizon: f64, regimes: &[Regime], seeds: &[u64], runs: &[BatchRun]) -> BatchReport {
    let regimes = regimes
        .iter()
        .map(|&regime| {
            let runs: Vec<RunSummary> = runs
                .iter()
                .filter(|r| r.regime == regime)
                .map(|r| summarize_run(r.seed, &r.outcome))
                .collect();
            let ok: Vec<&RunSummary> = runs.iter().filter(|r| r.aborted.is_none()).collect();
            let conv: Vec<f64> = ok.iter().map(|r| r.convergence_time.unwrap_or(horizon)).collect();
            let cv: Vec<f64> = ok.iter().filter_map(|r| r.consensus_value).collect();
            let dj: Vec<f64> = ok.iter().map(|r| r.delta_j).collect();
            let adj: Vec<f64> = dj.iter().map(|v| v.abs()).collect();
            let ce: Vec<f64> = ok.iter().map(|r| r.cumulative_ece).collect();
            RegimeSummary {
                regime,
                never_converged: ok.iter().filter(|r| r.convergence_time.is_none()).count(),
                convergence_time: Spread::of(&conv),
                consensus_value: Spread::of(&cv),
                delta_j: Spread::of(&dj),
                abs_delta_j: Spread::of(&adj),
                cumulative_ece: Spread::of(&ce),
                runs,
            }
        })
        .collect();
    BatchReport {
        seeds: seeds.to_vec(),
        horizon,
        regimes,
    }
}

/// Per-regime medians and IQRs of the evaluation criteria across seeds.
pub fn run_batch(scenario: &Scenario, regimes: &[Regime], seeds: &[u64]) -> BatchReport {
    let runs = run_batch_outputs(scenario, regimes, seeds);
    summarize_batch(scenario.sim.horizon, regimes, seeds, &runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn period_steps_require_exact_multiples() {
        assert_eq!(steps_in(0.5, 0.1), Some(5));
        assert_eq!(steps_in(10.0, 0.1), Some(100));
        assert_eq!(steps_in(0.55, 0.1), None);
        assert_eq!(steps_in(0.05, 0.1), None);
    }

    #[test]
    fn step_times_are_clean_decimals() {
        let sim = SimConfig::default();
        assert_eq!(sim.step_count(), 5000);
        assert_eq!(sim.time_of(3), 0.3);
        assert_eq!(sim.time_of(4999), 499.9);
    }

    #[test]
    fn convergence_needs_to_stay_below() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        let s = [Some(10.0), Some(0.1), Some(2.0), Some(0.2), Some(0.3)];
        assert_eq!(convergence_time(&t, &s, 0.05), Some(3.0));
        let flat = [Some(1.0), None, Some(1.0), Some(1.0), Some(1.0)];
        assert_eq!(convergence_time(&t, &flat, 0.05), None);
        assert_eq!(convergence_time(&t, &[None; 5], 0.05), None);
        let zero = [Some(0.0); 5];
        assert_eq!(convergence_time(&t, &zero, 0.05), Some(0.0));
    }

    #[test]
    fn spread_quartiles() {
        let s = Spread::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
        assert_eq!(Spread::of(&[]), None);
    }

    #[test]
    fn reference_scenario_is_valid() {
        let s = Scenario::reference();
        s.validate().unwrap();
        assert_eq!(s.period_steps(), vec![100, 20, 20, 10, 10, 10, 5, 5, 5, 5]);
    }
}
