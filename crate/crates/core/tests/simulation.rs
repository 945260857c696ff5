//! The discrete-event simulator against the closed forms.

use relay_freshness::analytics::{cache_freshness, user_freshness_multi};
use relay_freshness::experiment::ExperimentConfig;
use relay_freshness::optimizer::{assign_routes, evaluate_plan, solve_single_cache, SolverOptions};
use relay_freshness::sim::{
    file_seed, simulate_cache, simulate_file, simulate_system, SimEstimate, SimSpec,
};
use relay_freshness::{AllocationMatrix, Execution, FileParams, RouteRates, SystemConfig};

const CYCLES: u64 = 1_000_000;

fn spec(lambda: f64, pairs: &[(f64, f64)], seed: u64) -> SimSpec {
    SimSpec {
        lambda,
        routes: RouteRates::from_pairs(pairs).unwrap(),
        min_source_cycles: CYCLES,
        seed,
    }
}

fn assert_within_3se(est: SimEstimate, expected: f64) {
    assert!(est.cycles >= CYCLES);
    assert!(
        (est.mean - expected).abs() <= 3.0 * est.std_err,
        "simulated {} +/- {} vs analytic {expected}",
        est.mean,
        est.std_err
    );
}

fn analytic(lambda: f64, pairs: &[(f64, f64)]) -> f64 {
    user_freshness_multi(
        FileParams::new(lambda).unwrap(),
        &RouteRates::from_pairs(pairs).unwrap(),
    )
    .unwrap()
    .value()
}

#[test]
fn cache_node_matches_cache_freshness() {
    let expected = cache_freshness(FileParams::new(0.5).unwrap(), 2.0)
        .unwrap()
        .value();
    assert_eq!(expected, 0.8);
    assert_within_3se(
        simulate_cache(&spec(0.5, &[(2.0, 1.0)], 11), 0).unwrap(),
        expected,
    );
}

#[test]
fn single_route_examples() {
    assert_within_3se(simulate_file(&spec(1.0, &[(1.0, 1.0)], 12)).unwrap(), 0.25);
    assert_within_3se(
        simulate_file(&spec(2.0, &[(5.0, 7.0)], 13)).unwrap(),
        analytic(2.0, &[(5.0, 7.0)]),
    );
}

#[test]
fn two_route_example() {
    assert_within_3se(
        simulate_file(&spec(1.0, &[(1.0, 1.0), (1.0, 1.0)], 14)).unwrap(),
        10.0 / 27.0,
    );
}

#[test]
fn many_routes_with_a_dead_one() {
    let pairs = [(1.0, 2.0), (3.0, 4.0), (0.0, 5.0), (0.5, 0.2)];
    assert_within_3se(
        simulate_file(&spec(1.0, &pairs, 15)).unwrap(),
        analytic(1.0, &pairs),
    );
}

#[test]
fn no_cache_updates_is_exactly_stale() {
    let est = simulate_file(&spec(1.0, &[(0.0, 1.0), (0.0, 4.0)], 16)).unwrap();
    assert_eq!(est.mean, 0.0);
}

#[test]
fn same_seed_same_bits() {
    let s = SimSpec {
        min_source_cycles: 50_000,
        ..spec(1.3, &[(0.4, 2.0), (3.0, 1.0)], 17)
    };
    assert_eq!(simulate_file(&s).unwrap(), simulate_file(&s).unwrap());
    let other = SimSpec {
        seed: 18,
        ..s.clone()
    };
    assert_ne!(simulate_file(&s).unwrap(), simulate_file(&other).unwrap());
}

#[test]
fn one_file_system_is_simulate_file() {
    let config = SystemConfig::new(vec![1.5], 2.0, vec![3.0]).unwrap();
    let alloc = AllocationMatrix::from_rows(&[vec![3.0]], &[vec![2.0]]).unwrap();
    let sys = simulate_system(&config, &alloc, 20_000, 5, Execution::default()).unwrap();
    let single = simulate_file(&SimSpec {
        lambda: 1.5,
        routes: RouteRates::from_pairs(&[(2.0, 3.0)]).unwrap(),
        min_source_cycles: 20_000,
        seed: file_seed(5, 0),
    })
    .unwrap();
    assert_eq!(sys.per_file, vec![single]);
    assert_eq!(sys.total, single.mean);
}

#[test]
fn zero_allocation_is_never_fresh() {
    let config = SystemConfig::new(vec![1.0, 2.0], 1.0, vec![1.0, 1.0]).unwrap();
    let sys = simulate_system(
        &config,
        &AllocationMatrix::zeros(2, 2),
        10_000,
        1,
        Execution::default(),
    )
    .unwrap();
    assert_eq!(sys.total, 0.0);
}

#[test]
fn infeasible_allocation_is_rejected() {
    let config = SystemConfig::new(vec![1.0], 1.0, vec![1.0]).unwrap();
    let alloc = AllocationMatrix::from_rows(&[vec![2.0]], &[vec![0.5]]).unwrap();
    assert!(simulate_system(&config, &alloc, 1000, 1, Execution::default()).is_err());
}

#[test]
fn preset_total_matches_packed_allocation() {
    let config = ExperimentConfig::paper_preset().system;
    let sol = solve_single_cache(&config, SolverOptions::default()).unwrap();
    let alloc = assign_routes(&sol, &config).unwrap();
    let plan = evaluate_plan(&config, &alloc, &sol).unwrap();
    let seq = simulate_system(&config, &alloc, 200_000, 42, Execution::Sequential).unwrap();
    let par = simulate_system(&config, &alloc, 200_000, 42, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    assert!(
        (seq.total - plan.f_so).abs() <= 3.0 * seq.total_std_err,
        "simulated {} +/- {} vs F_so {}",
        seq.total,
        seq.total_std_err,
        plan.f_so
    );
}
