//! Optimizer and experiment pipeline on the built-in preset.

use relay_freshness::experiment::{parse_config, run, ExperimentConfig, Mode};
use relay_freshness::optimizer::{
    assign_routes, assign_routes_with, evaluate_plan, solve_single_cache, PackingStrategy,
    SolverOptions,
};
use relay_freshness::{AllocationMatrix, Error, Execution, SingleCacheSolution, SystemConfig};

fn preset() -> (SystemConfig, SingleCacheSolution) {
    let config = ExperimentConfig::paper_preset().system;
    let sol = solve_single_cache(&config, SolverOptions::default()).unwrap();
    (config, sol)
}

#[test]
fn preset_lambdas_sum_to_total() {
    let config = ExperimentConfig::paper_preset().system;
    assert_eq!((config.routes(), config.files()), (5, 30));
    assert!((config.lambdas().iter().sum::<f64>() - 100.0).abs() <= 1e-9);
    assert!(config.lambdas().windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn preset_packing_conserves_rates() {
    let (config, sol) = preset();
    for strategy in [PackingStrategy::FirstFit, PackingStrategy::Sequential] {
        let alloc = assign_routes_with(&sol, &config, strategy).unwrap();
        alloc.check_feasible(&config).unwrap();
        for i in 0..config.files() {
            let u = alloc.file_user_total(i);
            assert!(
                (u - sol.u_tot[i]).abs() <= 1e-9 * sol.u_tot[i].max(1.0),
                "file {i}: {u} vs {}",
                sol.u_tot[i]
            );
        }
        let plan = evaluate_plan(&config, &alloc, &sol).unwrap();
        assert!(plan.split_files.len() < config.routes());
        assert!(plan.f_so <= plan.f_ub);
        assert!(plan.gap() <= plan.gap_bound_coarse);
    }
}

#[test]
fn preset_first_fit_splits_k_minus_one_small_files() {
    let (config, sol) = preset();
    let plan = evaluate_plan(&config, &assign_routes(&sol, &config).unwrap(), &sol).unwrap();
    let split: Vec<usize> = plan.split_files.iter().map(|s| s.file + 1).collect();
    assert_eq!(split.len(), 4);
    assert!(split.iter().all(|&f| f > 20), "{split:?}");
    assert!(
        plan.gap() <= plan.gap_bound_fine,
        "gap {} fine {}",
        plan.gap(),
        plan.gap_bound_fine
    );
}

#[test]
fn first_fit_beats_sequential_on_preset() {
    let (config, sol) = preset();
    let gap = |strategy| {
        let alloc = assign_routes_with(&sol, &config, strategy).unwrap();
        evaluate_plan(&config, &alloc, &sol).unwrap().gap()
    };
    assert!(gap(PackingStrategy::FirstFit) < gap(PackingStrategy::Sequential));
}

#[test]
fn whole_file_allocation_has_no_gap() {
    let config = SystemConfig::new(vec![1.0, 2.0, 0.5], 3.0, vec![2.0, 1.0]).unwrap();
    let alloc = AllocationMatrix::from_rows(
        &[vec![1.5, 0.0, 0.5], vec![0.0, 1.0, 0.0]],
        &[vec![1.0, 0.0, 0.5], vec![0.0, 1.5, 0.0]],
    )
    .unwrap();
    let sol = SingleCacheSolution::from_allocation(&config, &alloc);
    let plan = evaluate_plan(&config, &alloc, &sol).unwrap();
    assert_eq!(plan.f_so, plan.f_ub);
    assert!(plan.split_files.is_empty());
}

#[test]
fn single_route_config_has_no_gap() {
    let text = "mode = \"optimize\"\n[system]\nfiles = 4\ncache_budget = 3.0\nroute_budgets = [5.0]\nlambdas = [3.0, 1.0, 0.5, 0.2]\n";
    let report = run(&parse_config(text).unwrap(), Execution::default())
        .unwrap()
        .report;
    assert_eq!(report.summary.f_so, report.summary.f_ub);
    assert_eq!(report.summary.gap_bound_coarse, 0.0);
}

#[test]
fn report_is_self_consistent() {
    let config = ExperimentConfig {
        mode: Mode::Simulate,
        cycles: 20_000,
        ..ExperimentConfig::paper_preset()
    };
    let report = run(&config, Execution::default()).unwrap().report;
    let s = &report.summary;
    assert_eq!(report.rows.len(), s.files);
    assert!((s.gap - (s.f_ub - s.f_so)).abs() <= 1e-12);
    let sum = |f: fn(&relay_freshness::experiment::ReportRow) -> f64| {
        report.rows.iter().map(f).sum::<f64>()
    };
    assert!((sum(|r| r.f_ub) - s.f_ub).abs() <= 1e-9);
    assert!((sum(|r| r.analytic) - s.f_so).abs() <= 1e-9);
    assert!((sum(|r| r.simulated.unwrap()) - s.simulated_total.unwrap()).abs() <= 1e-9);
    for row in &report.rows {
        let u: f64 = row.routes.iter().map(|r| r.user).sum();
        assert!((u - row.u_tot).abs() <= 1e-9 * row.u_tot.max(1.0));
    }
}

#[test]
fn eval_mode_reports_constraint_violations() {
    let text = "mode = \"eval\"\n[system]\nfiles = 1\ncache_budget = 1.0\nroute_budgets = [1.0]\nlambdas = [1.0]\n\
                [allocation]\nuser = [[2.0]]\ncache = [[0.5]]\n";
    let err = run(&parse_config(text).unwrap(), Execution::default()).unwrap_err();
    assert!(matches!(err, Error::ConstraintViolation(_)), "{err}");
}

#[test]
fn parse_errors_name_the_field() {
    let cases = [
        ("[system]\nfiles = 2\ncache_budget = 1.0\nroute_budgets = 1.0\nroutes = 1\n[system.geometric]\ntotal = 1.0\nratio = 1.3\n", "ratio"),
        ("[system]\nfiles = 3\ncache_budget = 1.0\nroute_budgets = [1.0]\nlambdas = [1.0, 2.0]\n", "lambdas"),
        ("[system]\nfiles = 1\ncache_budget = -1.0\nroute_budgets = [1.0]\nlambdas = [1.0]\n", "cache_budget"),
        ("[system]\nfiles = 1\ncache_budget = 1.0\nroute_budgets = [1.0, 0.0]\nlambdas = [1.0]\n", "route_budgets"),
    ];
    for (text, field) in cases {
        match parse_config(text) {
            Err(Error::Parse { field: f, .. }) => {
                assert!(f.contains(field), "{f} should name {field}")
            }
            other => panic!("expected a parse error naming {field}, got {other:?}"),
        }
    }
}
