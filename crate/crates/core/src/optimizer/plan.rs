use serde::{Deserialize, Serialize};

use super::{AllocationMatrix, SingleCacheSolution, SystemConfig, FEAS_TOL};
use crate::analytics::{freshness_loss_ratio, user_freshness_multi, FileParams};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// A file whose user rate is spread over several routes (0-based indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFile {
    pub file: usize,
    pub routes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    /// Optimum of the pooled single-cache relaxation.
    pub f_ub: f64,
    /// Total freshness achieved by the multi-route allocation.
    pub f_so: f64,
    pub per_file_ub: Vec<f64>,
    pub per_file: Vec<f64>,
    pub split_files: Vec<SplitFile>,
    /// `sum over split files of rho_i * F_ub(i)`.
    pub gap_bound_fine: f64,
    /// `0.5 (K - 1)`.
    pub gap_bound_coarse: f64,
}

impl OptimizerReport {
    pub fn gap(&self) -> f64 {
        self.f_ub - self.f_so
    }
}

pub fn evaluate_plan(
    config: &SystemConfig,
    alloc: &AllocationMatrix,
    sol: &SingleCacheSolution,
) -> Result<OptimizerReport> {
    evaluate_plan_with(config, alloc, sol, Execution::default())
}

/// Scores an allocation against the pooled solution it was derived from.
///
/// The allocation must be feasible and must not use more rate per file
/// than the pooled solution.
pub fn evaluate_plan_with(
    config: &SystemConfig,
    alloc: &AllocationMatrix,
    sol: &SingleCacheSolution,
    exec: Execution,
) -> Result<OptimizerReport> {
    alloc.check_feasible(config)?;
    sol.check_feasible(config)?;
    let lambdas = config.lambdas();
    for i in 0..config.files() {
        let (u, c) = (alloc.file_user_total(i), alloc.file_cache_total(i));
        let over = |used: f64, pooled: f64| used > pooled * (1.0 + FEAS_TOL) + f64::MIN_POSITIVE;
        if over(u, sol.u_tot[i]) || over(c, sol.c_tot[i]) {
            return Err(Error::ConstraintViolation(format!(
                "file {} uses (user {u}, cache {c}) beyond its pooled totals ({}, {})",
                i + 1,
                sol.u_tot[i],
                sol.c_tot[i]
            )));
        }
    }

    let per_file = exec.try_map_indices(config.files(), |i| -> Result<f64> {
        let routes = alloc.file_routes(i)?;
        Ok(user_freshness_multi(FileParams::new(lambdas[i])?, &routes)?.value())
    })?;
    let per_file_ub: Vec<f64> = (0..config.files())
        .map(|i| sol.file_freshness(lambdas, i))
        .collect();
    let f_so: f64 = per_file.iter().sum();
    let f_ub: f64 = per_file_ub.iter().sum();

    let split_files: Vec<SplitFile> = (0..config.files())
        .filter_map(|i| {
            let routes = alloc.routes_used_by(i);
            (routes.len() > 1).then_some(SplitFile { file: i, routes })
        })
        .collect();

    let mut gap_bound_fine = 0.0;
    for split in &split_files {
        let i = split.file;
        if sol.u_tot[i] > 0.0 && sol.c_tot[i] > 0.0 {
            let rho = freshness_loss_ratio(
                FileParams::new(lambdas[i])?,
                0.5 * sol.u_tot[i],
                0.5 * sol.c_tot[i],
            )?;
            gap_bound_fine += rho * per_file_ub[i];
        }
    }

    // Spreading a file's rates over routes never beats pooling them.
    assert!(
        f_so <= f_ub + 1e-12 * f_ub.max(1.0),
        "multi-route freshness {f_so} exceeds its pooled bound {f_ub}"
    );

    Ok(OptimizerReport {
        f_ub,
        f_so,
        per_file_ub,
        per_file,
        split_files,
        gap_bound_fine,
        gap_bound_coarse: 0.5 * (config.routes() as f64 - 1.0),
    })
}
