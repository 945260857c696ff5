use super::{AllocationMatrix, SingleCacheSolution, SystemConfig, FEAS_TOL};
use crate::analytics::{optimal_cache_skew, FileParams};
use crate::error::{Error, Result};

/// How whole files are chosen for routes `1..K-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PackingStrategy {
    /// Each route takes every remaining file that still fits whole, scanning
    /// in decreasing rate order; the smallest file left over then takes the
    /// route's residual capacity and sends its remainder to the last route.
    #[default]
    FirstFit,
    /// Each route takes files in decreasing rate order until the first one
    /// that does not fit, which takes the residual capacity and sends its
    /// remainder to the last route.
    Sequential,
}

/// Packs the pooled rates onto routes with [`PackingStrategy::FirstFit`].
pub fn assign_routes(sol: &SingleCacheSolution, config: &SystemConfig) -> Result<AllocationMatrix> {
    assign_routes_with(sol, config, PackingStrategy::FirstFit)
}

/// Splits each file's pooled user rate over the routes, then spreads its
/// pooled cache rate to match.
///
/// Files are taken in decreasing order of user rate, ties by index. A file
/// larger than an empty route fills that route completely and keeps its
/// remainder in line for the following routes. Files that were not placed
/// on routes `1..K-1` go to route `K`. Each of the first `K - 1` routes
/// splits at most one file, so at most `K - 1` files use several routes.
///
/// Cache rates follow the user rates: a single-route file keeps its whole
/// cache rate there, a two-route file uses the optimal skew with the larger
/// cache rate on the route with the larger user rate, and a file on three
/// or more routes gets cache rates proportional to its user rates.
pub fn assign_routes_with(
    sol: &SingleCacheSolution,
    config: &SystemConfig,
    strategy: PackingStrategy,
) -> Result<AllocationMatrix> {
    sol.check_feasible(config)?;
    let k_routes = config.routes();
    let n = config.files();
    let budgets = config.route_budgets();
    let last = k_routes - 1;

    // (route, user rate) pieces per file.
    let mut pieces: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut pending: Vec<(usize, f64)> = (0..n)
        .filter(|&i| sol.u_tot[i] > 0.0)
        .map(|i| (i, sol.u_tot[i]))
        .collect();
    pending.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    for (k, &budget) in budgets.iter().enumerate().take(last) {
        let slack = FEAS_TOL * budget;
        let mut cap = budget;
        let mut stopped_at = None;
        let mut j = 0;
        while j < pending.len() {
            let (file, need) = pending[j];
            if need <= cap + slack {
                pieces[file].push((k, need));
                cap = (cap - need).max(0.0);
                pending.remove(j);
                continue;
            }
            if cap == budget {
                // Larger than a whole route: fill it and keep the rest pending.
                pieces[file].push((k, budget));
                pending[j].1 = need - budget;
                cap = 0.0;
                break;
            }
            if strategy == PackingStrategy::Sequential {
                stopped_at = Some(j);
                break;
            }
            j += 1;
        }

        if cap > slack && !pending.is_empty() {
            let j = match strategy {
                PackingStrategy::FirstFit => pending.len() - 1,
                PackingStrategy::Sequential => stopped_at.unwrap_or(0),
            };
            let (file, need) = pending.remove(j);
            pieces[file].push((k, cap));
            pieces[file].push((last, need - cap));
        }
    }
    for (file, need) in pending {
        pieces[file].push((last, need));
    }

    rebalance_last_route(&mut pieces, budgets)?;

    let mut alloc = AllocationMatrix::zeros(k_routes, n);
    for (i, file_pieces) in pieces.iter().enumerate() {
        let mut per_route = vec![0.0; k_routes];
        for &(k, amount) in file_pieces {
            per_route[k] += amount;
        }
        let cache = cache_rates(config.lambdas()[i], &per_route, sol.c_tot[i], last)?;
        for k in 0..k_routes {
            alloc.set(k, i, cache[k], per_route[k]);
        }
    }
    alloc.check_feasible(config)?;
    Ok(alloc)
}

// Split remainders can overrun the last route when an earlier route ran
// out of files before filling up. Move the overflow onto routes with spare
// capacity, drawing first on files that are already split.
fn rebalance_last_route(pieces: &mut [Vec<(usize, f64)>], budgets: &[f64]) -> Result<()> {
    let last = budgets.len() - 1;
    let mut load = vec![0.0; budgets.len()];
    for &(k, amount) in pieces.iter().flatten() {
        load[k] += amount;
    }
    let mut excess = load[last] - budgets[last];
    if excess <= FEAS_TOL * budgets[last] {
        return Ok(());
    }

    let mut donors: Vec<usize> = (0..pieces.len())
        .filter(|&i| pieces[i].iter().any(|&(k, _)| k == last))
        .collect();
    // Already-split files first, then larger last-route pieces.
    let on_last = |p: &[(usize, f64)]| {
        p.iter()
            .filter(|&&(k, _)| k == last)
            .map(|&(_, a)| a)
            .sum::<f64>()
    };
    donors.sort_by(|&a, &b| {
        (pieces[b].len() > 1)
            .cmp(&(pieces[a].len() > 1))
            .then(on_last(&pieces[b]).total_cmp(&on_last(&pieces[a])))
            .then(a.cmp(&b))
    });

    for file in donors {
        for k in 0..last {
            let spare = budgets[k] - load[k];
            if excess <= 0.0 {
                return Ok(());
            }
            if spare <= 0.0 {
                continue;
            }
            let available = on_last(&pieces[file]);
            let moved = spare.min(excess).min(available);
            if moved <= 0.0 {
                break;
            }
            if let Some(piece) = pieces[file].iter_mut().find(|p| p.0 == last) {
                piece.1 -= moved;
            }
            pieces[file].retain(|&(k, a)| k != last || a > 0.0);
            pieces[file].push((k, moved));
            load[k] += moved;
            load[last] -= moved;
            excess -= moved;
        }
    }
    if excess > FEAS_TOL * budgets[last] {
        return Err(Error::ConstraintViolation(format!(
            "route {} overflows by {excess} after packing",
            last + 1
        )));
    }
    Ok(())
}

fn cache_rates(lambda: f64, user: &[f64], c_tot: f64, last: usize) -> Result<Vec<f64>> {
    let mut cache = vec![0.0; user.len()];
    let used: Vec<usize> = (0..user.len()).filter(|&k| user[k] > 0.0).collect();
    match used.as_slice() {
        [] => cache[last] = c_tot,
        [k] => cache[*k] = c_tot,
        [first, second] if c_tot > 0.0 => {
            let (small, large) = if user[*first] <= user[*second] {
                (*first, *second)
            } else {
                (*second, *first)
            };
            let u_bar = 0.5 * (user[small] + user[large]);
            let b = 0.5 * (user[large] - user[small]);
            let c_bar = 0.5 * c_tot;
            let a = optimal_cache_skew(FileParams::new(lambda)?, b, u_bar, c_bar)?;
            cache[large] = c_bar + a;
            cache[small] = (c_bar - a).max(0.0);
        }
        _ => {
            let total: f64 = used.iter().map(|&k| user[k]).sum();
            for &k in &used {
                cache[k] = c_tot * user[k] / total;
            }
        }
    }
    Ok(cache)
}
