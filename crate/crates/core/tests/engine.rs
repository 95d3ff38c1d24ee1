use dao_control::engine::{
    evaluate, run_batch, run_batch_outputs, run_from, AgentSnapshot, Event, InitialConditions, SimTrace, StepRecord,
};
use dao_control::plant::{AgentSpec, Dynamics, Objective};
use dao_control::{run_simulation, Regime, Scenario, Topology};

fn short(horizon: f64) -> Scenario {
    let mut s = Scenario::reference();
    s.sim.horizon = horizon;
    s
}

#[test]
fn reference_schedule() {
    let out = run_simulation(&Scenario::reference(), 11).unwrap();
    let trace = &out.trace;
    assert_eq!(trace.steps.len(), 5000);
    assert_eq!(trace.steps.last().unwrap().t, 499.9);
    assert_eq!(trace.epoch_count(1), 50);
    for agent in 2..=3 {
        assert_eq!(trace.epoch_count(agent), 250);
    }
    for agent in 4..=6 {
        assert_eq!(trace.epoch_count(agent), 500);
    }
    for agent in 7..=10 {
        assert_eq!(trace.epoch_count(agent), 1000);
    }
}

#[test]
fn controls_only_move_at_epochs() {
    let scenario = short(60.0);
    let out = run_simulation(&scenario.with_regime(Regime::DaoIncentive), 4).unwrap();
    let periods = [100, 20, 20, 10, 10, 10, 5, 5, 5, 5];
    for (k, pair) in out.trace.steps.windows(2).enumerate() {
        for (i, &p) in periods.iter().enumerate() {
            if (k + 1) % p != 0 {
                assert_eq!(
                    pair[0].agents[i].u,
                    pair[1].agents[i].u,
                    "agent {} step {}",
                    i + 1,
                    k + 1
                );
            }
        }
    }
}

#[test]
fn operations_follow_their_cadence() {
    let scenario = short(100.0);
    for regime in Regime::ALL {
        let out = run_simulation(&scenario.with_regime(regime), 5).unwrap();
        let times: Vec<f64> = out
            .trace
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Operation { t, .. } | Event::OperationInfeasible { t, .. } => Some(*t),
                _ => None,
            })
            .collect();
        if regime.operates() {
            let expected: Vec<f64> = (0..20).map(|k| k as f64 * 5.0).collect();
            assert_eq!(times, expected);
        } else {
            assert!(times.is_empty(), "{regime}");
        }
    }
}

#[test]
fn extracted_subgraphs_satisfy_constraints() {
    let runs = run_batch_outputs(&Scenario::reference(), &[Regime::DaoIncentiveWithOperation], &[1, 2, 3]);
    for run in runs {
        let out = run.outcome.unwrap();
        assert_eq!(out.trace.constraint_failures(), 0);
    }
}

#[test]
fn zero_state_is_a_fixed_point() {
    let rows = vec![vec![0.0; 4]; 4];
    let mut scenario = Scenario::reference();
    scenario.topology = Topology::new(rows).unwrap();
    scenario.agents = (1..=4)
        .map(|i| {
            AgentSpec::new(i, 0.5, -3.0, 3.0)
                .unwrap()
                .with_models(Dynamics::Hypothetical, Objective::Zero)
        })
        .collect();
    scenario.sim.horizon = 100.0;
    for regime in Regime::ALL {
        let out = run_from(
            &scenario.with_regime(regime),
            1,
            InitialConditions {
                x: vec![0.0; 4],
                u: vec![0.0; 4],
            },
        )
        .unwrap();
        for step in &out.trace.steps {
            for a in &step.agents {
                assert_eq!((a.x, a.u, a.d), (0.0, 0.0, 0.0));
            }
        }
        assert!(out.report.max_discrepancy.iter().all(|m| m.unwrap_or(0.0) == 0.0));
    }
}

#[test]
fn runs_are_bit_identical() {
    let scenario = short(50.0);
    let a = run_simulation(&scenario, 7).unwrap();
    let b = run_simulation(&scenario, 7).unwrap();
    assert_eq!(a, b);
    let c = run_simulation(&scenario, 8).unwrap();
    assert_ne!(a.trace.initial, c.trace.initial);
}

#[test]
fn regimes_share_initial_draws() {
    let runs = run_batch_outputs(&short(5.0), &Regime::ALL, &[3, 9]);
    assert_eq!(runs.len(), 8);
    for seed in [3, 9] {
        let inits: Vec<&InitialConditions> = runs
            .iter()
            .filter(|r| r.seed == seed)
            .map(|r| &r.outcome.as_ref().unwrap().trace.initial)
            .collect();
        assert!(inits.windows(2).all(|w| w[0] == w[1]));
        assert!(inits[0].x.iter().all(|x| (-20.0..20.0).contains(x)));
        assert!(inits[0].u.iter().all(|u| (-3.0..3.0).contains(u)));
    }
}

#[test]
fn identical_regimes_give_identical_reports() {
    let scenario = short(20.0);
    let report = run_batch(&scenario, &[Regime::Pos, Regime::Pos], &[1, 2]);
    assert_eq!(report.regimes[0], report.regimes[1]);
    let single = run_batch(&scenario, &[Regime::Pos], &[2]);
    let direct = run_simulation(&scenario.with_regime(Regime::Pos), 2).unwrap();
    let conv = single.regimes[0].convergence_time.unwrap().median;
    assert_eq!(conv, direct.report.convergence_time.unwrap_or(20.0));
    assert_eq!(single.regimes[0].delta_j.unwrap().median, direct.report.delta_j);
}

fn snap(x: f64, u: f64, r: f64, r_defined: bool) -> AgentSnapshot {
    AgentSnapshot {
        x,
        u,
        d: 0.0,
        gamma: 1.0,
        r,
        r_defined,
    }
}

#[test]
fn evaluation_of_a_hand_built_trace() {
    let quad = |i| {
        AgentSpec::new(i, 0.5, -3.0, 3.0)
            .unwrap()
            .with_models(Dynamics::Static, Objective::Quadratic)
    };
    let step = |t, agents| StepRecord {
        t,
        agents,
        subgraph_epoch: 0,
    };
    let trace = SimTrace {
        regime: Regime::FixedGain,
        seed: 0,
        base_dt: 0.5,
        initial: InitialConditions {
            x: vec![1.0, 2.0],
            u: vec![0.0, 1.0],
        },
        agents: vec![quad(1), quad(2)],
        steps: vec![
            step(0.0, vec![snap(1.0, 0.0, 1.0, true), snap(2.0, 1.0, 3.0, true)]),
            step(0.5, vec![snap(1.0, 0.5, 2.0, true), snap(2.0, 1.0, 99.0, false)]),
            step(1.0, vec![snap(0.0, 1.0, 4.0, true), snap(1.0, 2.0, 4.0, true)]),
        ],
        epochs: vec![],
        events: vec![],
    };
    let report = evaluate(&trace, 0.05);
    assert_eq!(report.max_discrepancy, vec![Some(2.0), Some(0.0), Some(0.0)]);
    // 0.5 * ((1 + 3) + 2 + (4 + 4))
    assert_eq!(report.cumulative_ece, 7.0);
    assert_eq!(report.convergence_time, Some(0.5));
    assert_eq!(report.consensus_value, Some(4.0));
    // (0 + 1 + 1 + 4) - (1 + 0 + 4 + 1)
    assert_eq!(report.delta_j, 0.0);
}
