use dao_control::daoop::{brute_force, operate, validate, OperationParams};
use dao_control::rng::SplitMix64;
use dao_control::Topology;
use proptest::prelude::*;

/// Random directed graph on `n` agents with roughly `density` of the
/// off-diagonal entries set to a weight in `[lo, 0.5)`.
fn random_graph_in(rng: &mut SplitMix64, n: usize, density: f64, lo: f64) -> Topology {
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i != j && rng.next_f64() < density {
                        rng.uniform(lo, 0.5)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Topology::new(rows).unwrap()
}

fn random_graph(rng: &mut SplitMix64, n: usize, density: f64) -> Topology {
    random_graph_in(rng, n, density, -0.5)
}

#[test]
fn heuristic_never_beats_the_exact_optimum() {
    let mut rng = SplitMix64::new(2024);
    let (mut found, mut infeasible) = (0, 0);
    for case in 0..150 {
        let n = 3 + rng.below(4);
        // Every fourth case is dense with positive weights and a tight
        // tolerance, which makes infeasible instances common.
        let tight = case % 4 == 0;
        let topo = if tight {
            random_graph_in(&mut rng, n, 1.0, 0.05)
        } else {
            random_graph(&mut rng, n, 0.4)
        };
        let r: Vec<f64> = (0..n).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let phi = 1 + rng.below(n);
        let psi = if tight {
            rng.uniform(0.0, 0.05)
        } else {
            rng.uniform(0.0, 1.0)
        };
        let params = OperationParams::new(phi, psi, case);
        let heuristic = operate(&topo, &r, &params).unwrap();
        let oracle = brute_force(&topo, &r, phi, psi).unwrap();
        match (&heuristic.subgraph, &oracle) {
            (Some(sub), Some(best)) => {
                found += 1;
                assert!(validate(&topo, sub, &r, &params).all_pass(), "case {case}");
                assert!(validate(&topo, best, &r, &params).all_pass(), "case {case}");
                assert!(best.edge_count() <= sub.edge_count(), "case {case}");
            }
            (Some(_), None) => panic!("case {case}: heuristic found a subgraph the oracle rules out"),
            (None, None) => infeasible += 1,
            (None, Some(_)) => {}
        }
        assert_eq!(heuristic.found, heuristic.subgraph.is_some());
    }
    assert!(found > 20 && infeasible > 0, "found {found}, infeasible {infeasible}");
}

#[test]
fn everything_fits_when_capacity_covers_all() {
    let topo = Topology::reference_experiment();
    let r = [0.3; 10];
    let res = operate(&topo, &r, &OperationParams::new(10, 0.0, 9)).unwrap();
    let sub = res.subgraph.unwrap();
    assert_eq!(sub.member_count(), 10);
    assert_eq!(sub.edge_count(), topo.edges().len());
    assert_eq!(res.removed_edge_count, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn operate_results_validate_and_repeat(
        seed in any::<u64>(),
        graph_seed in any::<u64>(),
        phi in 1usize..8,
        psi in 0.0..3.0f64,
    ) {
        let mut rng = SplitMix64::new(graph_seed);
        let topo = random_graph(&mut rng, 8, 0.3);
        let r: Vec<f64> = (0..8).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let params = OperationParams::new(phi, psi, seed);
        let a = operate(&topo, &r, &params).unwrap();
        let b = operate(&topo, &r, &params).unwrap();
        prop_assert_eq!(&a, &b);
        if let Some(sub) = &a.subgraph {
            let report = validate(&topo, sub, &r, &params);
            prop_assert!(report.all_pass(), "{:?}", report);
            prop_assert!(sub.member_count() <= phi);
        }
    }
}
