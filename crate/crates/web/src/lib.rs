//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export takes plain values and returns a JSON string. The `*_json`
//! functions hold the logic and are usable from native code as well.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use dao_control::daoop::{self, ConstraintReport, OperationParams, SubgraphSummary};
use dao_control::engine::{summarize_batch, BatchRun, SimOutput};
use dao_control::output::median_series;
use dao_control::scenario::REFERENCE_SCENARIO_JSON;
use dao_control::{run_simulation, Regime, Scenario, ScenarioConfig, Snapshot};

/// Curves are sampled every this many base steps.
const CURVE_STRIDE: usize = 10;

#[derive(Serialize)]
struct Curve {
    regime: Regime,
    t: Vec<f64>,
    max_discrepancy: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct RunView {
    curve: Curve,
    convergence_time: Option<f64>,
    consensus_value: Option<f64>,
    delta_j: f64,
    cumulative_ece: f64,
    operations_found: usize,
    operations_failed: usize,
    final_r: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct CompareRow {
    regime: Regime,
    convergence_median: Option<f64>,
    never_converged: usize,
    abs_delta_j_median: Option<f64>,
    consensus_median: Option<f64>,
}

#[derive(Serialize)]
struct CompareView {
    seeds: Vec<u64>,
    rows: Vec<CompareRow>,
    curves: Vec<Curve>,
}

#[derive(Serialize)]
struct OperateView {
    found: bool,
    iterations_used: usize,
    subgraph: Option<SubgraphSummary>,
    validation: Option<ConstraintReport>,
    oracle_edge_count: Option<usize>,
    edges: Vec<(usize, usize, f64)>,
}

fn scenario(horizon: f64) -> Result<Scenario, String> {
    let mut s = ScenarioConfig::reference().to_scenario().map_err(|e| e.to_string())?;
    s.sim.horizon = horizon;
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

fn curve(regime: Regime, times: &[f64], series: &[Option<f64>]) -> Curve {
    Curve {
        regime,
        t: times.iter().step_by(CURVE_STRIDE).copied().collect(),
        max_discrepancy: series.iter().step_by(CURVE_STRIDE).copied().collect(),
    }
}

fn times_of(out: &SimOutput) -> Vec<f64> {
    out.trace.steps.iter().map(|s| s.t).collect()
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("views serialize")
}

pub fn reference_scenario_json() -> String {
    REFERENCE_SCENARIO_JSON.to_string()
}

/// One run of `regime` on the reference scenario.
pub fn run_regime_json(regime: &str, seed: u64, horizon: f64) -> Result<String, String> {
    let regime: Regime = regime.parse().map_err(|e: dao_control::Error| e.to_string())?;
    let s = scenario(horizon)?.with_regime(regime);
    let out = run_simulation(&s, seed).map_err(|a| format!("aborted at t={}: {}", a.t, a.error))?;
    let (found, failed) = out.trace.operation_counts();
    let last = out.trace.steps.last();
    let view = RunView {
        curve: curve(regime, &times_of(&out), &out.report.max_discrepancy),
        convergence_time: out.report.convergence_time,
        consensus_value: out.report.consensus_value,
        delta_j: out.report.delta_j,
        cumulative_ece: out.report.cumulative_ece,
        operations_found: found,
        operations_failed: failed,
        final_r: last
            .map(|s| s.agents.iter().map(|a| a.r_defined.then_some(a.r)).collect())
            .unwrap_or_default(),
    };
    Ok(to_json(&view))
}

/// All four regimes over seeds `1..=seeds`, run sequentially.
pub fn compare_regimes_json(seeds: u64, horizon: f64) -> Result<String, String> {
    if seeds == 0 {
        return Err("at least one seed required".into());
    }
    let base = scenario(horizon)?;
    let seed_list: Vec<u64> = (1..=seeds).collect();
    let runs: Vec<BatchRun> = Regime::ALL
        .iter()
        .flat_map(|&regime| {
            let s = base.with_regime(regime);
            seed_list.iter().map(move |&seed| BatchRun {
                regime,
                seed,
                outcome: run_simulation(&s, seed),
            })
        })
        .collect();
    let report = summarize_batch(horizon, &Regime::ALL, &seed_list, &runs);
    let times: Vec<f64> = (0..base.sim.step_count()).map(|k| base.sim.time_of(k)).collect();
    let curves = Regime::ALL
        .iter()
        .map(|&regime| {
            let series: Vec<&[Option<f64>]> = runs
                .iter()
                .filter(|r| r.regime == regime)
                .filter_map(|r| r.outcome.as_ref().ok())
                .map(|o| o.report.max_discrepancy.as_slice())
                .collect();
            curve(regime, &times, &median_series(&series))
        })
        .collect();
    let rows = report
        .regimes
        .iter()
        .map(|r| CompareRow {
            regime: r.regime,
            convergence_median: r.convergence_time.map(|s| s.median),
            never_converged: r.never_converged,
            abs_delta_j_median: r.abs_delta_j.map(|s| s.median),
            consensus_median: r.consensus_value.map(|s| s.median),
        })
        .collect();
    Ok(to_json(&CompareView {
        seeds: seed_list,
        rows,
        curves,
    }))
}

/// Subgraph extraction on a snapshot (`{"adjacency": .., "r": ..}`).
pub fn operate_json(snapshot: &str, phi: usize, psi: f64, seed: u64) -> Result<String, String> {
    let snap = Snapshot::from_json(snapshot).map_err(|e| e.to_string())?;
    let topo = snap.topology();
    let params = OperationParams::new(phi, psi, seed);
    let res = daoop::operate(&topo, &snap.r, &params).map_err(|e| e.to_string())?;
    let oracle = if topo.n() <= daoop::ORACLE_MAX_AGENTS {
        daoop::brute_force(&topo, &snap.r, phi, psi)
            .map_err(|e| e.to_string())?
            .map(|s| s.edge_count())
    } else {
        None
    };
    let view = OperateView {
        found: res.found,
        iterations_used: res.iterations_used,
        subgraph: res.subgraph.as_ref().map(|s| SubgraphSummary::new(&topo, s)),
        validation: res
            .subgraph
            .as_ref()
            .map(|s| daoop::validate(&topo, s, &snap.r, &params)),
        oracle_edge_count: oracle,
        edges: topo
            .edges()
            .iter()
            .map(|&(i, j)| (i + 1, j + 1, topo.weight(i, j)))
            .collect(),
    };
    Ok(to_json(&view))
}

#[wasm_bindgen(js_name = referenceScenario)]
pub fn reference_scenario() -> String {
    reference_scenario_json()
}

#[wasm_bindgen(js_name = runRegime)]
pub fn run_regime(regime: &str, seed: u32, horizon: f64) -> Result<String, JsValue> {
    run_regime_json(regime, seed.into(), horizon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = compareRegimes)]
pub fn compare_regimes(seeds: u32, horizon: f64) -> Result<String, JsValue> {
    compare_regimes_json(seeds.into(), horizon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = operateSnapshot)]
pub fn operate_snapshot(snapshot: &str, phi: u32, psi: f64, seed: u32) -> Result<String, JsValue> {
    operate_json(snapshot, phi as usize, psi, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn run_view_has_sampled_curve() {
        let v: Value = serde_json::from_str(&run_regime_json("dao", 3, 20.0).unwrap()).unwrap();
        assert_eq!(v["curve"]["t"].as_array().unwrap().len(), 20);
        assert_eq!(v["curve"]["regime"], "dao");
        assert_eq!(v["final_r"].as_array().unwrap().len(), 10);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(run_regime_json("pow", 1, 10.0).is_err());
        assert!(run_regime_json("pos", 1, 0.05).is_err());
        assert!(compare_regimes_json(0, 10.0).is_err());
        assert!(operate_json("{}", 2, 1.0, 1).is_err());
    }

    #[test]
    fn comparison_lists_all_regimes() {
        let v: Value = serde_json::from_str(&compare_regimes_json(2, 10.0).unwrap()).unwrap();
        let names: Vec<&str> = v["rows"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["regime"].as_str().unwrap())
            .collect();
        assert_eq!(names, ["proposed", "dao", "pos", "fixed-gain"]);
        assert_eq!(v["curves"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn operate_reports_oracle() {
        let snap = r#"{"adjacency": [[0, 0.3, 0.2], [0.1, 0, 0.4], [0.2, 0.2, 0]], "r": [1, 1, 1]}"#;
        let v: Value = serde_json::from_str(&operate_json(snap, 3, 0.0, 1).unwrap()).unwrap();
        assert_eq!(v["found"], true);
        assert_eq!(v["edges"].as_array().unwrap().len(), 6);
        assert!(v["oracle_edge_count"].as_u64().unwrap() <= v["subgraph"]["edges"].as_array().unwrap().len() as u64);
    }
}
