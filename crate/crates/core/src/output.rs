//! CSV and JSON writers for traces, summaries and plots.
//!
//! Every number is written in a form that parses back to the identical
//! `f64`, so all summary figures can be recomputed from the trace CSV.

use std::io::{self, Write};

use serde::Serialize;

use crate::control::Regime;
use crate::engine::{Event, SimAbort, SimOutput, SimTrace, StepRecord};

pub const TRACE_HEADER: &str = "t,i,x,u,d,gamma,r,r_defined,subgraph_epoch";
pub const EPOCH_HEADER: &str = "t,i,alpha,beta,rtilde,consensus,h,gamma";

/// Shortest round-trip decimal, switching to exponent form for very large
/// or very small magnitudes.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

/// One row per (step, agent), agents numbered from 1.
pub fn write_trace_csv<W: Write>(trace: &SimTrace, mut w: W) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for step in &trace.steps {
        for (k, a) in step.agents.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                format_number(step.t),
                k + 1,
                format_number(a.x),
                format_number(a.u),
                format_number(a.d),
                format_number(a.gamma),
                format_number(a.r),
                u8::from(a.r_defined),
                step.subgraph_epoch
            )?;
        }
    }
    Ok(())
}

/// One row per agent epoch with the controller internals.
pub fn write_epoch_csv<W: Write>(trace: &SimTrace, mut w: W) -> io::Result<()> {
    writeln!(w, "{EPOCH_HEADER}")?;
    for e in &trace.epochs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            format_number(e.t),
            e.agent,
            format_number(e.alpha),
            format_number(e.beta),
            format_number(e.rtilde),
            format_number(e.consensus),
            format_opt(e.h),
            format_number(e.gamma)
        )?;
    }
    Ok(())
}

/// `t` followed by one column per named series; missing samples are empty.
pub fn write_plot_csv<W: Write>(times: &[f64], columns: &[(String, Vec<Option<f64>>)], mut w: W) -> io::Result<()> {
    write!(w, "t")?;
    for (name, _) in columns {
        write!(w, ",{name}")?;
    }
    writeln!(w)?;
    for (k, t) in times.iter().enumerate() {
        write!(w, "{}", format_number(*t))?;
        for (_, series) in columns {
            write!(w, ",{}", format_opt(series.get(k).copied().flatten()))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Per-step median across runs, over the runs that have a sample.
pub fn median_series(runs: &[&[Option<f64>]]) -> Vec<Option<f64>> {
    let len = runs.iter().map(|r| r.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let mut v: Vec<f64> = runs.iter().filter_map(|r| r.get(k).copied().flatten()).collect();
            if v.is_empty() {
                return None;
            }
            v.sort_by(f64::total_cmp);
            let m = v.len() / 2;
            Some(if v.len() % 2 == 1 {
                v[m]
            } else {
                0.5 * (v[m - 1] + v[m])
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReportFile<'a> {
    pub regime: Regime,
    pub seed: u64,
    pub base_dt: f64,
    pub epsilon_converge: f64,
    pub step_count: usize,
    pub epochs_per_agent: Vec<usize>,
    pub convergence_time: Option<f64>,
    pub consensus_value: Option<f64>,
    pub delta_j: f64,
    pub cumulative_ece: f64,
    pub initial_max_discrepancy: Option<f64>,
    pub final_max_discrepancy: Option<f64>,
    pub operations_found: usize,
    pub operations_failed: usize,
    pub events: &'a [Event],
}

impl<'a> RunReportFile<'a> {
    pub fn new(out: &'a SimOutput, epsilon_converge: f64) -> Self {
        let trace = &out.trace;
        let (found, failed) = trace.operation_counts();
        let first = out.report.max_discrepancy.iter().flatten().next().copied();
        Self {
            regime: trace.regime,
            seed: trace.seed,
            base_dt: trace.base_dt,
            epsilon_converge,
            step_count: trace.steps.len(),
            epochs_per_agent: (1..=trace.agents.len()).map(|i| trace.epoch_count(i)).collect(),
            convergence_time: out.report.convergence_time,
            consensus_value: out.report.consensus_value,
            delta_j: out.report.delta_j,
            cumulative_ece: out.report.cumulative_ece,
            initial_max_discrepancy: first,
            final_max_discrepancy: out.report.max_discrepancy.last().copied().flatten(),
            operations_found: found,
            operations_failed: failed,
            events: &trace.events,
        }
    }
}

/// Written instead of a summary when a run aborts.
#[derive(Debug, Clone, Serialize)]
pub struct AbortDiagnostics<'a> {
    pub regime: Regime,
    pub seed: u64,
    pub t: f64,
    pub error: String,
    pub steps_completed: usize,
    pub last_step: Option<&'a StepRecord>,
    pub events: &'a [Event],
}

impl<'a> AbortDiagnostics<'a> {
    pub fn new(abort: &'a SimAbort) -> Self {
        Self {
            regime: abort.trace.regime,
            seed: abort.trace.seed,
            t: abort.t,
            error: abort.error.to_string(),
            steps_completed: abort.trace.steps.len(),
            last_step: abort.trace.steps.last(),
            events: &abort.trace.events,
        }
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}
