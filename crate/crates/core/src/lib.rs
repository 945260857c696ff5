//! Freshness of cached files in a source → K parallel caches → user network.
//!
//! The crate is split along the lines of the pipeline it supports:
//!
//! * [`analytics`]: closed-form user and cache freshness for one file, the
//!   optimal cache skew between two routes and the split-loss ratio.
//! * [`quadrature`]: adaptive Gauss–Kronrod integration used as an
//!   independent route to the expected waiting time.
//! * [`sim`]: a seeded discrete-event simulator of the Poisson update
//!   dynamics, used to check every closed form empirically.
//! * [`optimizer`]: the auxiliary single-cache solver, route packing and
//!   the evaluation of a multi-route plan against its upper bound.
//! * [`experiment`]: configuration files, orchestration and report output
//!   behind the `relayfresh` command line tool.
//!
//! Data-parallel loops go through [`exec::Execution`]; with the `parallel`
//! feature disabled every loop runs sequentially with identical results.

pub mod analytics;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod optimizer;
pub mod quadrature;
pub mod sim;

pub use analytics::{FileParams, Freshness, Route, RouteRates, TwoCacheCoords};
pub use error::{Error, Result};
pub use exec::Execution;
pub use optimizer::{AllocationMatrix, OptimizerReport, SingleCacheSolution, SystemConfig};
pub use sim::{SimEstimate, SimSpec};
