//! Orchestration behind the `relayfresh` command line tool.

mod config;
mod output;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use config::{
    parse_config, Budgets, ExperimentConfig, Geometric, LambdaSpec, Mode, DEFAULT_CYCLES,
    DEFAULT_SEED, PAPER_PRESET,
};
pub use output::{format_sig, round_sig, write_report, OutputFormat, SIGNIFICANT_DIGITS};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::optimizer::{
    assign_routes, evaluate_plan_with, solve_single_cache, AllocationMatrix, OptimizerReport,
    SingleCacheSolution, SolverOptions,
};
use crate::sim::{simulate_system, FreshnessBreakdown};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteShare {
    /// 1-based route index.
    pub route: usize,
    pub user: f64,
    pub cache: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// 1-based file index.
    pub file: usize,
    pub lambda: f64,
    pub u_tot: f64,
    pub c_tot: f64,
    pub routes: Vec<RouteShare>,
    /// Pooled single-cache freshness of the file's totals.
    pub f_ub: f64,
    /// Freshness of the file under the multi-route allocation.
    pub analytic: f64,
    pub simulated: Option<f64>,
    pub simulated_std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub routes: usize,
    pub files: usize,
    pub f_ub: f64,
    pub f_so: f64,
    pub gap: f64,
    pub gap_bound_fine: f64,
    pub gap_bound_coarse: f64,
    /// 1-based indices of files spread over more than one route.
    pub split_files: Vec<usize>,
    pub solver_iterations: usize,
    pub simulated_total: Option<f64>,
    pub simulated_total_std_err: Option<f64>,
    pub cycles_per_file: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
}

/// A report plus the wall-clock time it took. The runtime is kept out of
/// [`ReportFile`] so that identical inputs give identical report bytes.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ReportFile,
    pub runtime: Duration,
}

/// Runs the pipeline selected by `config.mode`.
///
/// `eval` scores the configured allocation; `optimize` solves the pooled
/// relaxation, packs it onto routes and scores the result; `simulate` and
/// `reproduce-paper` additionally simulate the packed allocation. The
/// latter always uses the built-in preset system.
pub fn run(config: &ExperimentConfig, exec: Execution) -> Result<RunOutcome> {
    let start = Instant::now();
    let report = match config.mode {
        Mode::Eval => {
            let alloc = config
                .allocation
                .as_ref()
                .ok_or_else(|| Error::parse("allocation", "required in eval mode"))?;
            let sol = SingleCacheSolution::from_allocation(&config.system, alloc);
            let plan = evaluate_plan_with(&config.system, alloc, &sol, exec)?;
            build_report(config, &sol, alloc, &plan, None)
        }
        Mode::Optimize => {
            let (sol, alloc, plan) = optimize(config, exec)?;
            build_report(config, &sol, &alloc, &plan, None)
        }
        Mode::Simulate => simulate(config, exec)?,
        Mode::ReproducePaper => {
            let preset = ExperimentConfig {
                cycles: config.cycles,
                seed: config.seed,
                output_path: config.output_path.clone(),
                ..ExperimentConfig::paper_preset()
            };
            simulate(&preset, exec)?
        }
    };
    Ok(RunOutcome {
        report,
        runtime: start.elapsed(),
    })
}

fn optimize(
    config: &ExperimentConfig,
    exec: Execution,
) -> Result<(SingleCacheSolution, AllocationMatrix, OptimizerReport)> {
    let sol = solve_single_cache(&config.system, SolverOptions::default())?;
    let alloc = assign_routes(&sol, &config.system)?;
    let plan = evaluate_plan_with(&config.system, &alloc, &sol, exec)?;
    Ok((sol, alloc, plan))
}

fn simulate(config: &ExperimentConfig, exec: Execution) -> Result<ReportFile> {
    let (sol, alloc, plan) = optimize(config, exec)?;
    let sim = simulate_system(&config.system, &alloc, config.cycles, config.seed, exec)?;
    Ok(build_report(config, &sol, &alloc, &plan, Some(&sim)))
}

fn build_report(
    config: &ExperimentConfig,
    sol: &SingleCacheSolution,
    alloc: &AllocationMatrix,
    plan: &OptimizerReport,
    sim: Option<&FreshnessBreakdown>,
) -> ReportFile {
    let system = &config.system;
    let rows = (0..system.files())
        .map(|i| ReportRow {
            file: i + 1,
            lambda: system.lambdas()[i],
            u_tot: sol.u_tot[i],
            c_tot: sol.c_tot[i],
            routes: (0..system.routes())
                .filter(|&k| alloc.user(k, i) > 0.0 || alloc.cache(k, i) > 0.0)
                .map(|k| RouteShare {
                    route: k + 1,
                    user: alloc.user(k, i),
                    cache: alloc.cache(k, i),
                })
                .collect(),
            f_ub: plan.per_file_ub[i],
            analytic: plan.per_file[i],
            simulated: sim.map(|s| s.per_file[i].mean),
            simulated_std_err: sim.map(|s| s.per_file[i].std_err),
        })
        .collect();
    let summary = Summary {
        mode: config.mode,
        routes: system.routes(),
        files: system.files(),
        f_ub: plan.f_ub,
        f_so: plan.f_so,
        gap: plan.gap(),
        gap_bound_fine: plan.gap_bound_fine,
        gap_bound_coarse: plan.gap_bound_coarse,
        split_files: plan.split_files.iter().map(|s| s.file + 1).collect(),
        solver_iterations: sol.iterations,
        simulated_total: sim.map(|s| s.total),
        simulated_total_std_err: sim.map(|s| s.total_std_err),
        cycles_per_file: sim.map(|s| s.per_file.first().map_or(config.cycles, |e| e.cycles)),
        seed: sim.map(|_| config.seed),
    };
    ReportFile { rows, summary }
}
