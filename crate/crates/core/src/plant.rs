//! Agent dynamics, local objectives and the energy-consumption-efficiency
//! (ECE) estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Central-difference step for objectives without an analytic gradient.
pub const GRADIENT_STEP: f64 = 1e-4;

/// Control changes at or below this magnitude count as "unchanged".
pub const DEFAULT_ECE_DEADBAND: f64 = 1e-9;

/// Built-in state dynamics `x' = f(x, u_eff)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dynamics {
    /// `f = x * sin(i) + u_eff * cos(i)`.
    #[serde(rename = "paper-hypothetical")]
    Hypothetical,
    /// `f = u_eff`.
    #[serde(rename = "integrator")]
    Integrator,
    /// `f = 0`.
    #[serde(rename = "static")]
    Static,
}

/// Built-in local objectives `g(x, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// `g = i * sin(x) + u^2 * cos(i)`.
    #[serde(rename = "paper-hypothetical")]
    Hypothetical,
    /// `g = x^2 + u^2`.
    #[serde(rename = "quadratic")]
    Quadratic,
    /// `g = 0`.
    #[serde(rename = "zero")]
    Zero,
    /// `g = cos(x) * exp(u)`; no analytic gradient is registered, so the
    /// finite-difference path is used.
    #[serde(rename = "wave")]
    Wave,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    /// 1-based agent number `i`; enters the built-in formulas directly.
    pub number: usize,
    pub tau: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub dynamics: Dynamics,
    pub objective: Objective,
}

impl AgentSpec {
    pub fn new(number: usize, tau: f64, u_min: f64, u_max: f64) -> Result<Self> {
        let spec = Self {
            number,
            tau,
            u_min,
            u_max,
            dynamics: Dynamics::Hypothetical,
            objective: Objective::Hypothetical,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_models(mut self, dynamics: Dynamics, objective: Objective) -> Self {
        self.dynamics = dynamics;
        self.objective = objective;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str| format!("agents[{}].{}", self.number, name);
        if self.number == 0 {
            return Err(Error::param("agents", "agent numbers start at 1"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::param(field("tau"), "must be positive"));
        }
        if !(self.u_min.is_finite() && self.u_max.is_finite() && self.u_min < self.u_max) {
            return Err(Error::param(field("u_min"), "requires u_min < u_max"));
        }
        Ok(())
    }

    /// Saturation level `min(|u_min|, |u_max|)`.
    pub fn saturation_level(&self) -> f64 {
        self.u_min.abs().min(self.u_max.abs())
    }

    fn i(&self) -> f64 {
        self.number as f64
    }

    pub fn derivative(&self, x: f64, coupled_u: f64) -> f64 {
        match self.dynamics {
            Dynamics::Hypothetical => x * libm::sin(self.i()) + coupled_u * libm::cos(self.i()),
            Dynamics::Integrator => coupled_u,
            Dynamics::Static => 0.0,
        }
    }

    pub fn analytic_gradient(&self, _x: f64, u: f64) -> Option<f64> {
        match self.objective {
            Objective::Hypothetical => Some(2.0 * u * libm::cos(self.i())),
            Objective::Quadratic => Some(2.0 * u),
            Objective::Zero => Some(0.0),
            Objective::Wave => None,
        }
    }
}

/// One explicit-Euler step: `x + dt * f(x, u_eff)`.
pub fn step_dynamics(spec: &AgentSpec, x: f64, coupled_u: f64, dt: f64) -> f64 {
    x + dt * spec.derivative(x, coupled_u)
}

pub fn local_objective(spec: &AgentSpec, x: f64, u: f64) -> f64 {
    let i = spec.i();
    match spec.objective {
        Objective::Hypothetical => i * libm::sin(x) + u * u * libm::cos(i),
        Objective::Quadratic => x * x + u * u,
        Objective::Zero => 0.0,
        Objective::Wave => libm::cos(x) * libm::exp(u),
    }
}

/// Central difference of `g` in `u` with step `h`.
pub fn objective_gradient_fd(spec: &AgentSpec, x: f64, u: f64, h: f64) -> f64 {
    (local_objective(spec, x, u + h) - local_objective(spec, x, u - h)) / (2.0 * h)
}

/// `dg/du`, analytic where registered, central difference otherwise.
pub fn objective_gradient(spec: &AgentSpec, x: f64, u: f64) -> f64 {
    spec.analytic_gradient(x, u)
        .unwrap_or_else(|| objective_gradient_fd(spec, x, u, GRADIENT_STEP))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EceSample {
    /// Last finite ECE value; this is what controllers see.
    pub value: f64,
    pub defined: bool,
}

/// Per-agent mutable state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: f64,
    pub u: f64,
    /// Stabilizer accumulator, zero at start.
    pub d: f64,
    /// Incentive weight, always positive.
    pub gamma: f64,
    pub r: f64,
    pub r_defined: bool,
    /// Objective and control sampled at the latest decision epoch.
    pub last_g: Option<f64>,
    pub last_u: Option<f64>,
    /// Objective sampled at the epoch before `last_g`.
    pub prev_g: Option<f64>,
    /// Local disagreement from the previous epoch.
    pub last_rtilde: f64,
}

impl AgentState {
    pub fn new(x: f64, u: f64) -> Self {
        Self {
            x,
            u,
            d: 0.0,
            gamma: 1.0,
            r: 0.0,
            r_defined: false,
            last_g: None,
            last_u: None,
            prev_g: None,
            last_rtilde: 0.0,
        }
    }

    /// Finite-difference ECE over one decision epoch,
    /// `r = (g_now - g_last) / |u_now - u_last|`.
    ///
    /// When the control did not move by more than `deadband` the sample is
    /// flagged undefined and the previous finite value is kept.
    pub fn update_ece(&mut self, g_now: f64, u_now: f64, deadband: f64) -> EceSample {
        match (self.last_g, self.last_u) {
            (Some(g_last), Some(u_last)) if (u_now - u_last).abs() > deadband => {
                let r = (g_now - g_last) / (u_now - u_last).abs();
                if r.is_finite() {
                    self.r = r;
                    self.r_defined = true;
                } else {
                    self.r_defined = false;
                }
            }
            _ => self.r_defined = false,
        }
        self.prev_g = self.last_g;
        self.last_g = Some(g_now);
        self.last_u = Some(u_now);
        EceSample {
            value: self.r,
            defined: self.r_defined,
        }
    }

    /// `g - g_old` between this agent's two most recent epochs, 0 before
    /// two samples exist.
    pub fn objective_delta(&self) -> f64 {
        match (self.last_g, self.prev_g) {
            (Some(now), Some(old)) => now - old,
            _ => 0.0,
        }
    }
}
