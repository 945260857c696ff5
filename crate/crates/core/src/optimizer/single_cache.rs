use serde::{Deserialize, Serialize};

use super::{waterfill, AllocationMatrix, SystemConfig, FEAS_TOL};
use crate::analytics::single_route_value;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Stop once an iteration improves the objective by less than this.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 10_000,
            tol: 1e-10,
        }
    }
}

/// Per-file totals of the pooled single-cache relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleCacheSolution {
    pub u_tot: Vec<f64>,
    pub c_tot: Vec<f64>,
    /// `sum_i u_i c_i / ((lambda_i + u_i)(lambda_i + c_i))`.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each iteration.
    pub history: Vec<f64>,
}

impl SingleCacheSolution {
    /// Pools the per-route rates of an existing allocation.
    pub fn from_allocation(config: &SystemConfig, alloc: &AllocationMatrix) -> Self {
        let u_tot: Vec<f64> = (0..alloc.files())
            .map(|i| alloc.file_user_total(i))
            .collect();
        let c_tot: Vec<f64> = (0..alloc.files())
            .map(|i| alloc.file_cache_total(i))
            .collect();
        let objective = pooled_objective(config.lambdas(), &u_tot, &c_tot);
        SingleCacheSolution {
            u_tot,
            c_tot,
            objective,
            iterations: 0,
            history: vec![objective],
        }
    }

    /// Freshness of file `i` behind the pooled cache.
    pub fn file_freshness(&self, lambdas: &[f64], i: usize) -> f64 {
        single_term(lambdas[i], self.u_tot[i], self.c_tot[i])
    }

    pub fn check_feasible(&self, config: &SystemConfig) -> Result<()> {
        if self.u_tot.len() != config.files() || self.c_tot.len() != config.files() {
            return Err(Error::ConstraintViolation(format!(
                "solution covers {} files, system has {}",
                self.u_tot.len(),
                config.files()
            )));
        }
        let u: f64 = self.u_tot.iter().sum();
        if u > config.user_budget() * (1.0 + FEAS_TOL) {
            return Err(Error::ConstraintViolation(format!(
                "pooled user rate {u} exceeds the combined route budget {}",
                config.user_budget()
            )));
        }
        let c: f64 = self.c_tot.iter().sum();
        if c > config.cache_budget() * (1.0 + FEAS_TOL) {
            return Err(Error::ConstraintViolation(format!(
                "pooled cache rate {c} exceeds the cache budget {}",
                config.cache_budget()
            )));
        }
        if self
            .u_tot
            .iter()
            .chain(&self.c_tot)
            .any(|&x| !(x.is_finite() && x >= 0.0))
        {
            return Err(Error::ConstraintViolation(
                "solution has negative or non-finite rates".into(),
            ));
        }
        Ok(())
    }
}

fn single_term(lambda: f64, u: f64, c: f64) -> f64 {
    single_route_value(lambda, c, u)
}

pub(crate) fn pooled_objective(lambdas: &[f64], u: &[f64], c: &[f64]) -> f64 {
    lambdas
        .iter()
        .zip(u)
        .zip(c)
        .map(|((&l, &u), &c)| single_term(l, u, c))
        .sum()
}

/// Alternating maximization of the pooled problem: with cache rates fixed
/// the user rates solve a water-filling problem with weights
/// `c_i / (lambda_i + c_i)`, and symmetrically for the cache rates. Starts
/// from uniform cache rates `C / N`.
pub fn solve_single_cache(
    config: &SystemConfig,
    opts: SolverOptions,
) -> Result<SingleCacheSolution> {
    let lambdas = config.lambdas();
    let n = config.files();
    let mut c = vec![config.cache_budget() / n as f64; n];
    let mut u = vec![0.0; n];
    let mut objective = pooled_objective(lambdas, &u, &c);
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let user_weights: Vec<f64> = lambdas.iter().zip(&c).map(|(&l, &c)| c / (l + c)).collect();
        let next_u = waterfill(&user_weights, lambdas, config.user_budget())?;
        let cache_weights: Vec<f64> = lambdas
            .iter()
            .zip(&next_u)
            .map(|(&l, &u)| u / (l + u))
            .collect();
        let next_c = waterfill(&cache_weights, lambdas, config.cache_budget())?;
        iterations += 1;

        let next = pooled_objective(lambdas, &next_u, &next_c);
        // Each half-step is an exact block maximization, so only rounding
        // can make an iterate worse; the previous iterate is then kept.
        assert!(
            next >= objective - 1e-12 * objective.abs().max(1.0),
            "alternating ascent decreased the objective: {objective} -> {next}"
        );
        if next < objective {
            break;
        }
        let improvement = next - objective;
        (u, c, objective) = (next_u, next_c, next);
        history.push(next);
        if improvement < opts.tol {
            break;
        }
    }

    Ok(SingleCacheSolution {
        u_tot: u,
        c_tot: c,
        objective,
        iterations,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_file_takes_all_capacity() {
        let config = SystemConfig::new(vec![2.0], 3.0, vec![1.0, 4.0]).unwrap();
        let sol = solve_single_cache(&config, SolverOptions::default()).unwrap();
        assert_relative_eq!(sol.u_tot[0], 5.0, max_relative = 1e-12);
        assert_relative_eq!(sol.c_tot[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(sol.objective, 5.0 / 7.0 * 3.0 / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn identical_files_get_uniform_rates() {
        let config = SystemConfig::new(vec![1.5; 4], 8.0, vec![6.0, 6.0]).unwrap();
        let sol = solve_single_cache(&config, SolverOptions::default()).unwrap();
        for i in 0..4 {
            assert_relative_eq!(sol.u_tot[i], 3.0, max_relative = 1e-12);
            assert_relative_eq!(sol.c_tot[i], 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn history_is_monotone_and_feasible() {
        let config =
            SystemConfig::new(vec![0.1, 0.5, 2.0, 9.0, 30.0], 4.0, vec![2.0, 3.0]).unwrap();
        let sol = solve_single_cache(&config, SolverOptions::default()).unwrap();
        assert!(sol.history.windows(2).all(|w| w[1] >= w[0]));
        sol.check_feasible(&config).unwrap();
        assert_eq!(*sol.history.last().unwrap(), sol.objective);
    }

    #[test]
    fn from_allocation_pools_columns() {
        let config = SystemConfig::new(vec![1.0, 1.0], 4.0, vec![2.0, 2.0]).unwrap();
        let alloc = AllocationMatrix::from_rows(
            &[vec![1.0, 1.0], vec![2.0, 0.0]],
            &[vec![1.0, 0.0], vec![1.0, 2.0]],
        )
        .unwrap();
        let sol = SingleCacheSolution::from_allocation(&config, &alloc);
        assert_eq!(sol.u_tot, vec![3.0, 1.0]);
        assert_eq!(sol.c_tot, vec![2.0, 2.0]);
    }
}
