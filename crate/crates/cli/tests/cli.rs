use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SCENARIO: &str = dao_control::scenario::REFERENCE_SCENARIO_JSON;

fn daoctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daoctl")).args(args).output().unwrap()
}

fn write_scenario(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(SCENARIO).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    std::fs::write(&path, v.to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn show_scenario_round_trips() {
    let out = daoctl(&["show-scenario"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), SCENARIO);
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "paper.json", |_| {});
    let out = daoctl(&["validate-config", s(&path)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: 10 agents, 26 edges, 5000 steps"));
}

#[test]
fn config_errors_have_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.json");
    let empty = tmp.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let unknown = write_scenario(tmp.path(), "unknown.json", |v| v["controller"]["k9"] = 1.into());
    let off_grid = write_scenario(tmp.path(), "tau.json", |v| v["agents"][3]["tau"] = 0.25.into());
    let cases = [(&missing, 7), (&empty, 5), (&unknown, 6), (&off_grid, 2)];
    for (path, code) in cases {
        for cmd in ["validate-config", "run"] {
            let out = daoctl(&[cmd, s(path)]);
            assert_eq!(out.status.code(), Some(code), "{cmd} {}", path.display());
        }
    }
    let err = String::from_utf8(daoctl(&["validate-config", s(&off_grid)]).stderr).unwrap();
    assert!(err.contains("agents[4].tau"), "{err}");
}

#[test]
fn single_run_writes_three_files() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "paper.json", |v| v["sim"]["horizon"] = 50.into());
    let out_dir = tmp.path().join("out");
    let out = daoctl(&[
        "run",
        s(&path),
        "--regime",
        "proposed",
        "--seed",
        "7",
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "plot_proposed_seed7.csv",
            "summary_proposed_seed7.json",
            "trace_proposed_seed7.csv"
        ]
    );
    let plot = std::fs::read_to_string(out_dir.join("plot_proposed_seed7.csv")).unwrap();
    assert_eq!(plot.lines().next(), Some("t,proposed"));
    assert_eq!(plot.lines().count(), 501);
}

#[test]
fn batch_run_reports_every_regime() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "paper.json", |v| v["sim"]["horizon"] = 20.into());
    let out_dir = tmp.path().join("batch");
    let out = daoctl(&[
        "run",
        s(&path),
        "--regime",
        "all",
        "--seeds",
        "1..3",
        "--out",
        s(&out_dir),
    ]);
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("batch.json")).unwrap()).unwrap();
    let regimes: Vec<&str> = report["regimes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["regime"].as_str().unwrap())
        .collect();
    assert_eq!(regimes, ["proposed", "dao", "pos", "fixed-gain"]);
    assert_eq!(report["seeds"], serde_json::json!([1, 2, 3]));
    for r in report["regimes"].as_array().unwrap() {
        assert_eq!(r["runs"].as_array().unwrap().len(), 3);
        assert!(r["convergence_time"]["median"].is_number());
    }
    let plot = std::fs::read_to_string(out_dir.join("plot.csv")).unwrap();
    assert_eq!(plot.lines().next(), Some("t,proposed,dao,pos,fixed-gain"));
}

#[test]
fn aborted_run_leaves_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "huge.json", |v| {
        v["sim"]["init_state_range"] = serde_json::json!([1e307, 1e308]);
        v["sim"]["horizon"] = 100.into();
    });
    let out_dir = tmp.path().join("out");
    let out = daoctl(&["run", s(&path), "--regime", "pos", "--seed", "1", "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(3));
    let diag: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("abort_pos_seed1.json")).unwrap()).unwrap();
    assert!(diag["error"].as_str().unwrap().contains("non-finite"));
    assert!(diag["t"].as_f64().unwrap() < 100.0);
}

fn snapshot(dir: &Path, r: &[f64]) -> PathBuf {
    let v: Value = serde_json::from_str(SCENARIO).unwrap();
    let snap = serde_json::json!({ "adjacency": v["topology"]["adjacency"], "r": r });
    let path = dir.join("snapshot.json");
    std::fs::write(&path, snap.to_string()).unwrap();
    path
}

#[test]
fn operate_on_a_feasible_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let path = snapshot(tmp.path(), &[0.5; 10]);
    let out = daoctl(&["operate", s(&path), "--phi", "10", "--psi", "0"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["found"], true);
    assert_eq!(
        v["subgraph"]["members"],
        serde_json::json!([1, 2, 3, 4, 5, 6, 7, 8, 9, 10])
    );
    assert_eq!(v["edge_count"], 26);
    assert_eq!(v["validation"]["violations"], serde_json::json!([]));
    assert!(v.get("oracle").is_none());
}

#[test]
fn operate_with_oracle_compares_edge_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let r = [0.5, 0.4, 0.6, 0.5, 0.45, 0.5, 0.55, 0.5, 0.52, 0.48];
    let path = snapshot(tmp.path(), &r);
    let out = daoctl(&[
        "operate",
        s(&path),
        "--phi",
        "4",
        "--psi",
        "2",
        "--seed",
        "3",
        "--oracle",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let heuristic = v["edge_count"].as_i64().unwrap();
    let oracle = v["oracle"]["edge_count"].as_i64().unwrap();
    assert!(oracle <= heuristic);
    assert_eq!(v["oracle"]["edge_gap"].as_i64().unwrap(), heuristic - oracle);
    assert!(v["subgraph"]["members"].as_array().unwrap().len() <= 4);
}

#[test]
fn operate_reports_infeasibility() {
    let tmp = tempfile::tempdir().unwrap();
    // Every agent has positive out-edges to agents with a different r, so
    // any subgraph short of the full graph has some W_i > 0.
    let path = tmp.path().join("adversarial.json");
    let snap = r#"{"adjacency": [[0, 0.3, 0.2], [0.1, 0, 0.4], [0.2, 0.2, 0]], "r": [1, 2, 4]}"#;
    std::fs::write(&path, snap).unwrap();
    let out = daoctl(&["operate", s(&path), "--phi", "2", "--psi", "0", "--oracle"]);
    assert_eq!(out.status.code(), Some(4));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["found"], false);
    assert_eq!(v["oracle"]["found"], false);
    let missing = daoctl(&["operate", s(&path)]);
    assert_eq!(missing.status.code(), Some(2));
}

struct Row {
    t: f64,
    i: usize,
    x: f64,
    u: f64,
    r: f64,
    defined: bool,
    epoch: u32,
}

fn parse_trace(text: &str) -> Vec<Row> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,i,x,u,d,gamma,r,r_defined,subgraph_epoch"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            Row {
                t: f[0].parse().unwrap(),
                i: f[1].parse().unwrap(),
                x: f[2].parse().unwrap(),
                u: f[3].parse().unwrap(),
                r: f[6].parse().unwrap(),
                defined: f[7] == "1",
                epoch: f[8].parse().unwrap(),
            }
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn summary_is_recomputable_from_the_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "paper.json", |_| {});
    for (regime, seed) in [("proposed", "7"), ("pos", "12")] {
        let out_dir = tmp.path().join(regime);
        let out = daoctl(&[
            "run",
            s(&path),
            "--regime",
            regime,
            "--seed",
            seed,
            "--out",
            s(&out_dir),
        ]);
        assert!(out.status.success());
        let rows =
            parse_trace(&std::fs::read_to_string(out_dir.join(format!("trace_{regime}_seed{seed}.csv"))).unwrap());
        let summary: Value = serde_json::from_str(
            &std::fs::read_to_string(out_dir.join(format!("summary_{regime}_seed{seed}.json"))).unwrap(),
        )
        .unwrap();

        let steps: Vec<&[Row]> = rows.chunks(10).collect();
        assert!(steps
            .iter()
            .all(|s| s.iter().enumerate().all(|(k, r)| r.i == k + 1 && r.t == s[0].t)));
        assert_eq!(summary["step_count"], steps.len());
        let dt = steps[1][0].t - steps[0][0].t;
        assert!(close(summary["base_dt"].as_f64().unwrap(), dt));

        let disc: Vec<Option<f64>> = steps
            .iter()
            .map(|s| {
                let d: Vec<f64> = s.iter().filter(|r| r.defined).map(|r| r.r).collect();
                (!d.is_empty())
                    .then(|| d.iter().cloned().fold(f64::MIN, f64::max) - d.iter().cloned().fold(f64::MAX, f64::min))
            })
            .collect();
        let first = disc.iter().flatten().next().copied();
        assert_eq!(summary["initial_max_discrepancy"].as_f64(), first);
        assert_eq!(summary["final_max_discrepancy"].as_f64(), *disc.last().unwrap());

        let eps = summary["epsilon_converge"].as_f64().unwrap();
        let conv = first.and_then(|f| {
            let last_bad = disc.iter().rposition(|d| matches!(d, Some(v) if *v > eps * f));
            match last_bad {
                None => Some(steps[0][0].t),
                Some(k) => steps.get(k + 1).map(|s| s[0].t),
            }
        });
        assert_eq!(summary["convergence_time"].as_f64(), conv);

        let cum: f64 = steps
            .iter()
            .map(|s| dt * s.iter().filter(|r| r.defined).map(|r| r.r).sum::<f64>())
            .sum();
        assert!(close(summary["cumulative_ece"].as_f64().unwrap(), cum));

        let last = steps.last().unwrap();
        let defined: Vec<f64> = last.iter().filter(|r| r.defined).map(|r| r.r).collect();
        let cons = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        match (summary["consensus_value"].as_f64(), cons) {
            (Some(a), Some(b)) => assert!(close(a, b)),
            (a, b) => assert_eq!(a, b),
        }

        let g = |r: &Row| r.i as f64 * r.x.sin() + r.u * r.u * (r.i as f64).cos();
        let total = |s: &[Row]| s.iter().map(g).sum::<f64>();
        let dj = total(last) - total(steps[0]);
        assert!(
            close(summary["delta_j"].as_f64().unwrap(), dj),
            "{} vs {dj}",
            summary["delta_j"]
        );

        let taus = [10.0, 2.0, 2.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5];
        let horizon = steps.len() as f64 * dt;
        let epochs: Vec<usize> = taus.iter().map(|t| (horizon / t).round() as usize).collect();
        assert_eq!(summary["epochs_per_agent"], serde_json::json!(epochs));

        let found = last[0].epoch as usize;
        assert_eq!(summary["operations_found"], found);
        let cadence = if regime == "proposed" {
            (horizon / 5.0).round() as usize
        } else {
            0
        };
        assert_eq!(summary["operations_failed"], cadence - found);
    }
}
