//! Saturated consensus/incentive control law, stake-based voting weights and
//! the bounded incentive update.

use std::f64::consts::FRAC_2_PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{objective_gradient, AgentSpec, AgentState};

/// Default cap on voting weights.
pub const DEFAULT_WEIGHT_CLAMP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// Constant gains `alpha`, `beta`.
    #[serde(rename = "fixed-gain")]
    FixedGain,
    /// Voting weights with constant stake `gamma = 1`.
    #[serde(rename = "pos")]
    Pos,
    /// Voting weights with incentive-updated stake on the full graph.
    #[serde(rename = "dao")]
    DaoIncentive,
    /// As `DaoIncentive`, on the periodically extracted critical subgraph.
    #[serde(rename = "proposed")]
    DaoIncentiveWithOperation,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::DaoIncentiveWithOperation,
        Regime::DaoIncentive,
        Regime::Pos,
        Regime::FixedGain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::FixedGain => "fixed-gain",
            Regime::Pos => "pos",
            Regime::DaoIncentive => "dao",
            Regime::DaoIncentiveWithOperation => "proposed",
        }
    }

    pub fn updates_stake(self) -> bool {
        matches!(self, Regime::DaoIncentive | Regime::DaoIncentiveWithOperation)
    }

    pub fn operates(self) -> bool {
        self == Regime::DaoIncentiveWithOperation
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| {
            Error::param(
                "regime",
                format!("unknown regime `{s}` (expected proposed, dao, pos or fixed-gain)"),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerParams {
    pub regime: Regime,
    pub alpha_fixed: f64,
    pub beta_fixed: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    #[serde(default)]
    pub delta_override: Option<f64>,
    /// Use `r_i / tau_i - r_j / tau_j` in the consensus term.
    #[serde(default)]
    pub tau_scaled_consensus: bool,
    #[serde(default = "default_weight_clamp")]
    pub weight_clamp: f64,
}

fn default_weight_clamp() -> f64 {
    DEFAULT_WEIGHT_CLAMP
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            regime: Regime::DaoIncentiveWithOperation,
            alpha_fixed: 2.0,
            beta_fixed: 1.0,
            k1: 2.0,
            k2: 5.0,
            k3: 0.3,
            k4: 0.1,
            delta_override: None,
            tau_scaled_consensus: false,
            weight_clamp: DEFAULT_WEIGHT_CLAMP,
        }
    }
}

impl ControllerParams {
    pub fn with_regime(&self, regime: Regime) -> Self {
        Self { regime, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("controller.alpha_fixed", self.alpha_fixed),
            ("controller.beta_fixed", self.beta_fixed),
            ("controller.k1", self.k1),
            ("controller.k2", self.k2),
            ("controller.k3", self.k3),
            ("controller.k4", self.k4),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(field, "must be a positive finite number"));
            }
        }
        if let Some(delta) = self.delta_override {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::param("controller.delta_override", "must be positive"));
            }
        }
        if !(self.weight_clamp.is_finite() && self.weight_clamp > 1.0) {
            return Err(Error::param("controller.weight_clamp", "must exceed 1"));
        }
        Ok(())
    }

    pub fn saturation_level(&self, spec: &AgentSpec) -> f64 {
        self.delta_override.unwrap_or_else(|| spec.saturation_level())
    }
}

/// `sgn(u) * min(|u|, delta)`.
pub fn saturate(u: f64, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    u.clamp(-delta, delta)
}

/// `sum_j a_ij * (r_i - (r_i + r_j) / 2)` over the given neighbors.
pub fn local_disagreement(i: usize, neighbors: &[(usize, f64)], r: &[f64]) -> f64 {
    neighbors.iter().map(|&(j, a)| a * (r[i] - (r[i] + r[j]) / 2.0)).sum()
}

/// `sum_j a_ij * (r_i - r_j)`, optionally with ECE scaled by response time.
pub fn consensus_term(i: usize, neighbors: &[(usize, f64)], r: &[f64], tau_scale: Option<&[f64]>) -> f64 {
    match tau_scale {
        None => neighbors.iter().map(|&(j, a)| a * (r[i] - r[j])).sum(),
        Some(tau) => neighbors
            .iter()
            .map(|&(j, a)| a * (r[i] / tau[i] - r[j] / tau[j]))
            .sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VotingWeights {
    pub alpha: f64,
    pub beta: f64,
    pub rtilde: f64,
    /// Set when either weight hit the clamp.
    pub clamped: bool,
}

/// `alpha = gamma * exp(k1 * rtilde)`, `beta = gamma * exp(-k2 * rtilde)`,
/// each kept inside `[1 / clamp, clamp]`.
pub fn voting_weights(gamma: f64, rtilde: f64, k1: f64, k2: f64, clamp: f64) -> VotingWeights {
    debug_assert!(gamma > 0.0);
    let raw_alpha = gamma * libm::exp(k1 * rtilde);
    let raw_beta = gamma * libm::exp(-k2 * rtilde);
    let bound = |w: f64| w.clamp(1.0 / clamp, clamp);
    let (alpha, beta) = (bound(raw_alpha), bound(raw_beta));
    let clamped = alpha != raw_alpha || beta != raw_beta;
    if clamped {
        log::debug!("voting weight clamped: rtilde={rtilde:e}, alpha={raw_alpha:e}, beta={raw_beta:e}");
    }
    VotingWeights {
        alpha,
        beta,
        rtilde,
        clamped,
    }
}

/// Everything one decision epoch of the control law produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlOutput {
    pub u: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rtilde: f64,
    pub consensus: f64,
    pub clamped: bool,
}

/// Inputs visible to agent `i` at its decision epoch.
#[derive(Debug, Clone, Copy)]
pub struct EpochContext<'a> {
    /// 0-based agent index into `r` and `tau`.
    pub index: usize,
    /// Controller-visible ECE of every agent.
    pub r: &'a [f64],
    /// Response time of every agent.
    pub tau: &'a [f64],
    /// Active out-neighbors `(j, a_ij)`.
    pub neighbors: &'a [(usize, f64)],
    pub dt_epoch: f64,
}

/// One epoch of the saturated law
/// `u = sat(-d - alpha * dg/du - beta * C)`, `d += dt * alpha * beta * C`,
/// with `C = sum_j a_ij (r_i - r_j)` over the active neighbors.
pub fn control_step(
    spec: &AgentSpec,
    state: &AgentState,
    ctx: &EpochContext<'_>,
    params: &ControllerParams,
) -> Result<ControlOutput> {
    let i = ctx.index;
    let rtilde = local_disagreement(i, ctx.neighbors, ctx.r);
    let scale = params.tau_scaled_consensus.then_some(ctx.tau);
    let consensus = consensus_term(i, ctx.neighbors, ctx.r, scale);

    let (alpha, beta, clamped) = match params.regime {
        Regime::FixedGain => (params.alpha_fixed, params.beta_fixed, false),
        Regime::Pos => {
            let w = voting_weights(1.0, rtilde, params.k1, params.k2, params.weight_clamp);
            (w.alpha, w.beta, w.clamped)
        }
        Regime::DaoIncentive | Regime::DaoIncentiveWithOperation => {
            let w = voting_weights(state.gamma, rtilde, params.k1, params.k2, params.weight_clamp);
            (w.alpha, w.beta, w.clamped)
        }
    };

    let grad = objective_gradient(spec, state.x, state.u);
    let inner = -state.d - alpha * grad - beta * consensus;
    let d = state.d + ctx.dt_epoch * alpha * beta * consensus;
    let check = |quantity, value: f64| {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite {
                quantity,
                agent: spec.number,
                value,
            })
        }
    };
    check("control input", inner)?;
    check("stabilizer", d)?;

    Ok(ControlOutput {
        u: saturate(inner, params.saturation_level(spec)),
        d,
        alpha,
        beta,
        rtilde,
        consensus,
        clamped,
    })
}

/// `1 + 2 atan(h) / pi`, evaluated so that it stays inside the open
/// interval `(0, 2)` in floating point for every finite `h`.
pub fn incentive_multiplier(h: f64) -> f64 {
    let m = if h < 0.0 {
        // 1 + (2/pi) atan(h) = (2/pi) atan(-1/h) for h < 0, no cancellation
        FRAC_2_PI * libm::atan(-1.0 / h)
    } else {
        1.0 + FRAC_2_PI * libm::atan(h)
    };
    m.clamp(f64::MIN_POSITIVE, 2.0_f64.next_down())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncentiveOutcome {
    pub gamma: f64,
    pub multiplier: f64,
    pub h: f64,
    /// `k3 * (rtilde - rtilde_old)`.
    pub consensus_reward: f64,
    /// `k4 * sum_j a_ij (g_j - g_j_old)`.
    pub neighbor_support: f64,
}

/// Stake update `gamma <- gamma * (2 atan(h) / pi + 1)` with
/// `h = k3 (rtilde - rtilde_old) + k4 sum_j a_ij (g_j - g_j_old)`.
///
/// `neighbor_deltas` holds `(a_ij, g_j - g_j_old)` for the active neighbors.
pub fn incentive_update(
    gamma: f64,
    rtilde_now: f64,
    rtilde_old: f64,
    neighbor_deltas: &[(f64, f64)],
    k3: f64,
    k4: f64,
) -> IncentiveOutcome {
    let consensus_reward = k3 * (rtilde_now - rtilde_old);
    let neighbor_support = k4 * neighbor_deltas.iter().map(|&(a, dg)| a * dg).sum::<f64>();
    let h = consensus_reward + neighbor_support;
    let multiplier = incentive_multiplier(h);
    IncentiveOutcome {
        gamma: (gamma * multiplier).clamp(f64::MIN_POSITIVE, f64::MAX),
        multiplier,
        h,
        consensus_reward,
        neighbor_support,
    }
}
