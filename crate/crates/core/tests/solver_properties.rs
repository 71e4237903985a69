use crowdship_core::dh::spv_order;
use crowdship_core::scenario::{load_solution, save_solution};
use crowdship_core::{
    generate_instance, load_instance, save_instance, solve_dh, solve_exact_bruteforce, total_objective,
    validate_solution, DhConfig, DvSpec, GenSpec, Instance, NetworkKind, OracleLimits,
};
use proptest::prelude::*;

fn small(seed: u64, pdos: usize, spvs: usize) -> Instance {
    generate_instance(&GenSpec {
        network: NetworkKind::Grid { cols: 5, rows: 4 },
        area_sq_miles: 5.0,
        pdos,
        spvs,
        seed,
        dv_spec: DvSpec {
            fleet_limit: Some(2),
            ..DvSpec::default()
        },
        ..GenSpec::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn more_spvs_never_cost_more(seed in 0u64..1000, batches in 0usize..3, extra in 0usize..15) {
        // the smaller run's batches are a prefix of the larger run's
        let inst = small(seed, 8, 30);
        let lo = 10 * batches;
        let cost = |n| {
            let cfg = DhConfig { spv_limit: Some(n), batch_size: 10, ..DhConfig::default() };
            solve_dh(&inst, &cfg).unwrap().0.cost.total
        };
        prop_assert!(cost(lo + extra) <= cost(lo) + 1e-6);
    }

    #[test]
    fn oracle_bounds_heuristic(seed in 0u64..1000) {
        let inst = small(seed, 4, 3);
        let (dh, _) = solve_dh(&inst, &DhConfig::default()).unwrap();
        let (exact, cost) = solve_exact_bruteforce(&inst, &OracleLimits::default()).unwrap();
        prop_assert!(validate_solution(&inst, &exact).is_ok());
        prop_assert!((total_objective(&inst, &exact).unwrap().total - cost).abs() < 1e-9);
        prop_assert!(cost <= dh.cost.total + 1e-9);
    }

    #[test]
    fn spv_order_is_a_permutation(seed in any::<u64>(), n in 0usize..40) {
        let inst = small(1, 0, n);
        let mut order = spv_order(&inst, seed);
        order.sort_unstable();
        prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn files_round_trip_through_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let inst = small(7, 10, 20);
    let ip = dir.path().join("inst.json");
    save_instance(&ip, &inst).unwrap();
    let back = load_instance(&ip).unwrap();
    let (sol, _) = solve_dh(&back, &DhConfig::default()).unwrap();
    let (again, _) = solve_dh(&inst, &DhConfig::default()).unwrap();
    assert_eq!(sol, again);
    let sp = dir.path().join("sol.json");
    save_solution(&sp, &sol).unwrap();
    let loaded = load_solution(&sp).unwrap();
    assert!(validate_solution(&inst, &loaded).is_ok());
    assert!((total_objective(&inst, &loaded).unwrap().total - sol.cost.total).abs() < 1e-9);
}
