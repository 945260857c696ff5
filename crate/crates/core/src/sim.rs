//! Seeded discrete-event simulation of the per-file update dynamics.
//!
//! Each file evolves independently: the source bumps its version at rate
//! `lambda`, cache `k` copies the current source version at rate `c_k`, and
//! the user pulls cache `k`'s version at rate `u_k`, keeping the newer of
//! its own and the received copy. Freshness is the time-average of
//! `user_version == source_version`, measured over whole source cycles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::analytics::RouteRates;
use crate::error::{check_positive, Error, Result};
use crate::exec::Execution;
use crate::optimizer::{AllocationMatrix, SystemConfig};

/// Source cycles per batch for the batch-means standard error.
pub const BATCH_CYCLES: u64 = 1000;

/// Fraction of cycles discarded before measurement starts.
pub const WARMUP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub lambda: f64,
    pub routes: RouteRates,
    pub min_source_cycles: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub cycles: u64,
    pub elapsed_sim_time: f64,
}

/// Per-file empirical freshness of a whole allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreshnessBreakdown {
    pub per_file: Vec<SimEstimate>,
    pub total: f64,
    pub total_std_err: f64,
}

impl SimSpec {
    fn validate(&self) -> Result<()> {
        check_positive("lambda", self.lambda)?;
        if self.min_source_cycles == 0 {
            return Err(Error::invalid("min_source_cycles must be positive"));
        }
        Ok(())
    }
}

/// Runs one file until at least `min_source_cycles` source cycles have
/// been measured after warm-up.
pub fn simulate_file(spec: &SimSpec) -> Result<SimEstimate> {
    spec.validate()?;
    Ok(run(spec, Observer::User, true))
}

/// Same dynamics as [`simulate_file`], but measures the freshness of the
/// copy held by cache `route` (0-based).
pub fn simulate_cache(spec: &SimSpec, route: usize) -> Result<SimEstimate> {
    spec.validate()?;
    if route >= spec.routes.len() {
        return Err(Error::invalid(format!(
            "route {route} out of range for {} routes",
            spec.routes.len()
        )));
    }
    Ok(run(spec, Observer::Cache(route), false))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Observer {
    User,
    Cache(usize),
}

#[derive(Default, Clone, Copy)]
struct Batch {
    fresh: f64,
    length: f64,
}

fn batch_size(min_cycles: u64) -> u64 {
    if min_cycles >= 20 * BATCH_CYCLES {
        BATCH_CYCLES
    } else {
        (min_cycles / 20).max(1)
    }
}

// With `skip_fresh` set, an interval in which the user already holds the
// current version is closed by drawing the next source update directly:
// nothing that happens before it can change any state that matters after
// it, because every cache and the user become stale at that update.
fn run(spec: &SimSpec, observer: Observer, skip_fresh: bool) -> SimEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let routes = spec.routes.routes();
    let k = routes.len();
    let lambda = spec.lambda;

    // Event rates: [source, cache_1..cache_K, user_1..user_K].
    let mut rates = Vec::with_capacity(2 * k + 1);
    rates.push(lambda);
    rates.extend(routes.iter().map(|r| r.cache));
    rates.extend(routes.iter().map(|r| r.user));
    let total_rate: f64 = rates.iter().sum();

    let block = batch_size(spec.min_source_cycles);
    let batches = spec.min_source_cycles.div_ceil(block);
    let measured = batches * block;
    let warmup = ((spec.min_source_cycles as f64 * WARMUP_FRACTION).ceil() as u64).max(1);

    let mut source_version: u64 = 0;
    let mut cache_version = vec![0u64; k];
    let mut user_version: u64 = 0;

    let mut completed: u64 = 0;
    let mut current = Batch::default();
    let mut sums: Vec<Batch> = Vec::with_capacity(batches as usize);

    while completed < warmup + measured {
        let fresh = match observer {
            Observer::User => user_version == source_version,
            Observer::Cache(k) => cache_version[k] == source_version,
        };
        let (dt, event) = if fresh && skip_fresh {
            (rng.sample::<f64, _>(Exp1) / lambda, 0)
        } else {
            let dt = rng.sample::<f64, _>(Exp1) / total_rate;
            (dt, pick(&rates, rng.random::<f64>() * total_rate))
        };
        if completed >= warmup {
            current.length += dt;
            if fresh {
                current.fresh += dt;
            }
        }
        match event {
            0 => {
                source_version += 1;
                completed += 1;
                if completed > warmup && (completed - warmup).is_multiple_of(block) {
                    sums.push(current);
                    current = Batch::default();
                }
            }
            e if e <= k => cache_version[e - 1] = source_version,
            e => user_version = user_version.max(cache_version[e - 1 - k]),
        }
        debug_assert!(cache_version.iter().all(|&v| v <= source_version));
        debug_assert!(user_version <= source_version);
    }

    summarize(&sums, measured)
}

fn pick(rates: &[f64], mut target: f64) -> usize {
    for (i, &r) in rates.iter().enumerate() {
        if target < r {
            return i;
        }
        target -= r;
    }
    // Rounding can push the target past the last nonzero rate.
    rates.iter().rposition(|&r| r > 0.0).unwrap_or(0)
}

// Ratio estimator over batches with a delta-method standard error.
fn summarize(batches: &[Batch], cycles: u64) -> SimEstimate {
    let fresh: f64 = batches.iter().map(|b| b.fresh).sum();
    let length: f64 = batches.iter().map(|b| b.length).sum();
    let mean = if length > 0.0 { fresh / length } else { 0.0 };
    let n = batches.len() as f64;
    let std_err = if batches.len() < 2 || length == 0.0 {
        0.0
    } else {
        let ss: f64 = batches
            .iter()
            .map(|b| {
                let e = b.fresh - mean * b.length;
                e * e
            })
            .sum();
        (ss / (n * (n - 1.0))).sqrt() / (length / n)
    };
    SimEstimate {
        mean: mean.clamp(0.0, 1.0),
        std_err,
        cycles,
        elapsed_sim_time: length,
    }
}

/// Seed for file `index` derived from a master seed (SplitMix64 finalizer
/// over a golden-ratio counter).
pub fn file_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulates every file of an allocation. Results do not depend on `exec`.
pub fn simulate_system(
    config: &SystemConfig,
    alloc: &AllocationMatrix,
    cycles_per_file: u64,
    seed: u64,
    exec: Execution,
) -> Result<FreshnessBreakdown> {
    alloc.check_feasible(config)?;
    if cycles_per_file == 0 {
        return Err(Error::invalid("cycles_per_file must be positive"));
    }
    let specs: Vec<SimSpec> = (0..config.files())
        .map(|i| {
            Ok(SimSpec {
                lambda: config.lambdas()[i],
                routes: alloc.file_routes(i)?,
                min_source_cycles: cycles_per_file,
                seed: file_seed(seed, i),
            })
        })
        .collect::<Result<_>>()?;
    let per_file = exec.map_indices(specs.len(), |i| run(&specs[i], Observer::User, true));
    let total = per_file.iter().map(|e| e.mean).sum();
    let total_std_err = per_file
        .iter()
        .map(|e| e.std_err * e.std_err)
        .sum::<f64>()
        .sqrt();
    Ok(FreshnessBreakdown {
        per_file,
        total,
        total_std_err,
    })
}
