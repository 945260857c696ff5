//! Update-rate allocation across parallel routes.
//!
//! The multi-route problem is approximated in three steps:
//! [`solve_single_cache`] pools all routes into one cache and solves that
//! relaxation (its optimum bounds the true one from above),
//! [`assign_routes`] packs the pooled per-file rates back onto individual
//! routes keeping as many files as possible on a single route, and
//! [`evaluate_plan`] measures what the packing lost.

mod packing;
mod plan;
mod single_cache;
mod waterfill;

use serde::{Deserialize, Serialize};

use crate::analytics::{Route, RouteRates};
use crate::error::{check_positive, check_rate, Error, Result};

pub use packing::{assign_routes, assign_routes_with, PackingStrategy};
pub use plan::{evaluate_plan, evaluate_plan_with, OptimizerReport, SplitFile};
pub use single_cache::{solve_single_cache, SingleCacheSolution, SolverOptions};
pub use waterfill::waterfill;

/// Relative slack allowed on every capacity comparison.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    lambdas: Vec<f64>,
    cache_budget: f64,
    route_budgets: Vec<f64>,
}

impl SystemConfig {
    pub fn new(lambdas: Vec<f64>, cache_budget: f64, route_budgets: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::invalid("at least one file is required"));
        }
        if route_budgets.is_empty() {
            return Err(Error::invalid("at least one route is required"));
        }
        for (i, &l) in lambdas.iter().enumerate() {
            check_positive(&format!("lambdas[{i}]"), l)?;
        }
        for (k, &u) in route_budgets.iter().enumerate() {
            check_positive(&format!("route_budgets[{k}]"), u)?;
        }
        check_positive("cache_budget", cache_budget)?;
        Ok(SystemConfig {
            lambdas,
            cache_budget,
            route_budgets,
        })
    }

    /// Number of routes `K`.
    pub fn routes(&self) -> usize {
        self.route_budgets.len()
    }

    /// Number of files `N`.
    pub fn files(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn cache_budget(&self) -> f64 {
        self.cache_budget
    }

    pub fn route_budgets(&self) -> &[f64] {
        &self.route_budgets
    }

    /// Pooled cache → user budget of the single-cache relaxation.
    pub fn user_budget(&self) -> f64 {
        self.route_budgets.iter().sum()
    }
}

/// Per-route, per-file rates, stored row-major with one row per route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationMatrix {
    routes: usize,
    files: usize,
    user: Vec<f64>,
    cache: Vec<f64>,
}

impl AllocationMatrix {
    pub fn zeros(routes: usize, files: usize) -> Self {
        AllocationMatrix {
            routes,
            files,
            user: vec![0.0; routes * files],
            cache: vec![0.0; routes * files],
        }
    }

    /// Builds a matrix from `K` rows of `N` user rates and the same shape of
    /// cache rates.
    pub fn from_rows(user: &[Vec<f64>], cache: &[Vec<f64>]) -> Result<Self> {
        let routes = user.len();
        if routes == 0 || cache.len() != routes {
            return Err(Error::invalid(format!(
                "user and cache need the same nonzero number of rows, got {} and {}",
                user.len(),
                cache.len()
            )));
        }
        let files = user[0].len();
        for (k, (u, c)) in user.iter().zip(cache).enumerate() {
            if u.len() != files || c.len() != files {
                return Err(Error::invalid(format!(
                    "row {k} does not have {files} columns"
                )));
            }
        }
        let m = AllocationMatrix {
            routes,
            files,
            user: user.concat(),
            cache: cache.concat(),
        };
        for (idx, (&u, &c)) in m.user.iter().zip(&m.cache).enumerate() {
            let (k, i) = (idx / files, idx % files);
            check_rate(&format!("user[{k}][{i}]"), u)?;
            check_rate(&format!("cache[{k}][{i}]"), c)?;
        }
        Ok(m)
    }

    pub fn routes(&self) -> usize {
        self.routes
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn user(&self, route: usize, file: usize) -> f64 {
        self.user[route * self.files + file]
    }

    pub fn cache(&self, route: usize, file: usize) -> f64 {
        self.cache[route * self.files + file]
    }

    pub fn set(&mut self, route: usize, file: usize, cache: f64, user: f64) {
        let idx = route * self.files + file;
        self.cache[idx] = cache;
        self.user[idx] = user;
    }

    pub fn user_rows(&self) -> Vec<Vec<f64>> {
        self.user.chunks(self.files).map(<[f64]>::to_vec).collect()
    }

    pub fn cache_rows(&self) -> Vec<Vec<f64>> {
        self.cache.chunks(self.files).map(<[f64]>::to_vec).collect()
    }

    /// The routes carrying one file.
    pub fn file_routes(&self, file: usize) -> Result<RouteRates> {
        RouteRates::new(
            (0..self.routes)
                .map(|k| Route::new(self.cache(k, file), self.user(k, file)))
                .collect(),
        )
    }

    pub fn route_user_load(&self, route: usize) -> f64 {
        (0..self.files).map(|i| self.user(route, i)).sum()
    }

    pub fn file_user_total(&self, file: usize) -> f64 {
        (0..self.routes).map(|k| self.user(k, file)).sum()
    }

    pub fn file_cache_total(&self, file: usize) -> f64 {
        (0..self.routes).map(|k| self.cache(k, file)).sum()
    }

    pub fn total_cache(&self) -> f64 {
        self.cache.iter().sum()
    }

    /// Routes with a positive user rate for `file`.
    pub fn routes_used_by(&self, file: usize) -> Vec<usize> {
        (0..self.routes)
            .filter(|&k| self.user(k, file) > 0.0)
            .collect()
    }

    /// Checks shape and every capacity constraint of `config`, naming the
    /// first violated route or the cache budget.
    pub fn check_feasible(&self, config: &SystemConfig) -> Result<()> {
        if self.routes != config.routes() || self.files != config.files() {
            return Err(Error::ConstraintViolation(format!(
                "allocation is {}x{} but the system has {} routes and {} files",
                self.routes,
                self.files,
                config.routes(),
                config.files()
            )));
        }
        for (idx, (&u, &c)) in self.user.iter().zip(&self.cache).enumerate() {
            if !(u.is_finite() && c.is_finite() && u >= 0.0 && c >= 0.0) {
                return Err(Error::ConstraintViolation(format!(
                    "route {} file {} has invalid rates (cache {c}, user {u})",
                    idx / self.files + 1,
                    idx % self.files + 1
                )));
            }
        }
        for (k, &cap) in config.route_budgets().iter().enumerate() {
            let load = self.route_user_load(k);
            if load > cap * (1.0 + FEAS_TOL) {
                return Err(Error::ConstraintViolation(format!(
                    "route {} (row {}) carries user rate {load} above its budget {cap}",
                    k + 1,
                    k + 1
                )));
            }
        }
        let total = self.total_cache();
        if total > config.cache_budget() * (1.0 + FEAS_TOL) {
            return Err(Error::ConstraintViolation(format!(
                "total cache rate {total} exceeds the cache budget {}",
                config.cache_budget()
            )));
        }
        Ok(())
    }
}
