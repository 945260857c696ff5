//! Closed-form freshness of a single file.
//!
//! A file is updated at the source at rate `lambda`. Route `k` consists of a
//! cache refreshed from the source at rate `c_k` and a user refreshed from
//! that cache at rate `u_k`, all as independent Poisson processes. Freshness
//! is the long-run fraction of time the stored copy matches the source.

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_rate, Error, Result};
use crate::quadrature::{self, Tolerance};

/// Relative rate separation below which a route counts as `c == u`.
pub const REL_EQ_TOL: f64 = 1e-6;

/// Route count from which the inclusion-exclusion sum is never used.
pub const QUAD_SWITCH_K: usize = 12;

/// Agreement required between the closed form and the quadrature oracle.
pub const CROSS_TOL: f64 = 1e-8;

/// Largest tolerated sum of absolute inclusion-exclusion weights. Each
/// term carries a few ulps of error, so the sum loses about
/// `f64::EPSILON * condition` absolute accuracy.
pub const MAX_EXPANSION_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FileParams {
    lambda: f64,
}

impl FileParams {
    pub fn new(lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(FileParams { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Update rates along one source → cache → user path.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Route {
    pub cache: f64,
    pub user: f64,
}

impl Route {
    pub fn new(cache: f64, user: f64) -> Self {
        Route { cache, user }
    }

    /// A route delivers fresh copies only if both of its links are used.
    pub fn is_live(&self) -> bool {
        self.cache > 0.0 && self.user > 0.0
    }

    fn validate(&self, k: usize) -> Result<()> {
        check_rate(&format!("routes[{k}].cache"), self.cache)?;
        check_rate(&format!("routes[{k}].user"), self.user)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRates {
    routes: Vec<Route>,
}

impl RouteRates {
    pub fn new(routes: Vec<Route>) -> Result<Self> {
        if routes.is_empty() {
            return Err(Error::invalid("at least one route is required"));
        }
        for (k, r) in routes.iter().enumerate() {
            r.validate(k)?;
        }
        Ok(RouteRates { routes })
    }

    /// Builds routes from `(cache, user)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(c, u)| Route::new(c, u)).collect())
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn live(&self) -> impl Iterator<Item = Route> + '_ {
        self.routes.iter().copied().filter(Route::is_live)
    }
}

/// Two routes written as averages and signed deviations:
/// `u1 = u_bar - b`, `u2 = u_bar + b`, `c1 = c_bar - a`, `c2 = c_bar + a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoCacheCoords {
    u_bar: f64,
    c_bar: f64,
    a: f64,
    b: f64,
}

impl TwoCacheCoords {
    pub fn new(u_bar: f64, c_bar: f64, a: f64, b: f64) -> Result<Self> {
        check_rate("u_bar", u_bar)?;
        check_rate("c_bar", c_bar)?;
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid("skews must be finite"));
        }
        if a.abs() > c_bar * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "|a| = {} exceeds c_bar = {c_bar}",
                a.abs()
            )));
        }
        if b.abs() > u_bar * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "|b| = {} exceeds u_bar = {u_bar}",
                b.abs()
            )));
        }
        Ok(TwoCacheCoords {
            u_bar,
            c_bar,
            a: a.clamp(-c_bar, c_bar),
            b: b.clamp(-u_bar, u_bar),
        })
    }

    pub fn from_routes(first: Route, second: Route) -> Result<Self> {
        Self::new(
            0.5 * (first.user + second.user),
            0.5 * (first.cache + second.cache),
            0.5 * (second.cache - first.cache),
            0.5 * (second.user - first.user),
        )
    }

    pub fn routes(&self) -> [Route; 2] {
        [
            Route::new(
                (self.c_bar - self.a).max(0.0),
                (self.u_bar - self.b).max(0.0),
            ),
            Route::new(
                (self.c_bar + self.a).max(0.0),
                (self.u_bar + self.b).max(0.0),
            ),
        ]
    }

    pub fn u_bar(&self) -> f64 {
        self.u_bar
    }

    pub fn c_bar(&self) -> f64 {
        self.c_bar
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

/// A freshness value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Freshness(f64);

impl Freshness {
    pub const ZERO: Freshness = Freshness(0.0);

    fn clamped(v: f64) -> Self {
        Freshness(v.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Freshness> for f64 {
    fn from(f: Freshness) -> f64 {
        f.0
    }
}

/// `u c / ((lambda + u)(lambda + c))`, shared by every single-route path so
/// equal inputs give bit-identical values.
pub(crate) fn single_route_value(lambda: f64, c: f64, u: f64) -> f64 {
    bernoulli_factor(lambda, u) * bernoulli_factor(lambda, c)
}

fn bernoulli_factor(lambda: f64, rate: f64) -> f64 {
    if rate == 0.0 {
        0.0
    } else {
        rate / (lambda + rate)
    }
}

/// Freshness of the cached copy: `c / (lambda + c)`.
pub fn cache_freshness(p: FileParams, c: f64) -> Result<Freshness> {
    check_rate("c", c)?;
    Ok(Freshness::clamped(bernoulli_factor(p.lambda, c)))
}

/// Freshness at the user behind a single cache.
pub fn user_freshness_single(p: FileParams, c: f64, u: f64) -> Result<Freshness> {
    check_rate("c", c)?;
    check_rate("u", u)?;
    Ok(Freshness::clamped(single_route_value(p.lambda, c, u)))
}

/// `P(X > x)` for `X = Exp(c) + Exp(u)`, the delay until a route delivers
/// the current source version.
pub fn route_survival(x: f64, c: f64, u: f64) -> Result<f64> {
    check_rate("x", x)?;
    check_positive("c", c)?;
    check_positive("u", u)?;
    Ok(survival_unchecked(x, c, u))
}

// The survival function is symmetric in (c, u). Factoring out the slower
// exponential leaves `1 + m (1 - e^{-dx}) / d`, which expm1 evaluates without
// cancellation and which tends to the Erlang-2 form `1 + m x` as d -> 0.
fn survival_unchecked(x: f64, c: f64, u: f64) -> f64 {
    let (m, big) = if c <= u { (c, u) } else { (u, c) };
    let d = big - m;
    let growth = if d == 0.0 {
        m * x
    } else {
        m * -(-d * x).exp_m1() / d
    };
    ((-m * x).exp() * (1.0 + growth)).clamp(0.0, 1.0)
}

/// Freshness at the user when the file is served through several routes.
///
/// Routes where either rate is zero never deliver and are dropped. One or
/// two live routes use their exact closed forms; more routes use the
/// inclusion-exclusion expansion unless it is badly conditioned (nearly
/// equal `c_k`, `u_k`) or too large, in which case the waiting time is
/// integrated numerically.
pub fn user_freshness_multi(p: FileParams, r: &RouteRates) -> Result<Freshness> {
    let live = canonical_live(r);
    let lambda = p.lambda;
    let value = match live.as_slice() {
        [] => 0.0,
        [only] => single_route_value(lambda, only.cache, only.user),
        [first, second] => two_route_closed_form(lambda, *first, *second),
        _ if use_expansion(&live) => 1.0 - lambda * expansion_waiting_time(lambda, &live),
        _ => 1.0 - lambda * quadrature_waiting_time(lambda, &live),
    };
    Ok(Freshness::clamped(value))
}

/// Live routes in a fixed order, so every evaluation path gives the same
/// bits for any permutation of the input.
fn canonical_live(r: &RouteRates) -> Vec<Route> {
    let mut live: Vec<Route> = r.live().collect();
    live.sort_by(|x, y| x.cache.total_cmp(&y.cache).then(x.user.total_cmp(&y.user)));
    live
}

fn use_expansion(live: &[Route]) -> bool {
    live.len() < QUAD_SWITCH_K && expansion_condition(live) <= MAX_EXPANSION_CONDITION
}

/// Sum of absolute weights in the inclusion-exclusion expansion; infinite
/// when a route has `c` and `u` within [`REL_EQ_TOL`].
pub fn expansion_condition(live: &[Route]) -> f64 {
    live.iter()
        .map(|r| {
            let d = (r.cache - r.user).abs();
            if d <= REL_EQ_TOL * r.cache.max(r.user) {
                f64::INFINITY
            } else {
                (r.cache + r.user) / d
            }
        })
        .product()
}

/// `F = 1 - lambda * E[W_u]` evaluated term by term over all `2^K` choices
/// of one rate per route. Dead routes are dropped first.
///
/// This exposes the raw expansion for cross-checking; it loses accuracy as
/// [`expansion_condition`] grows and fails for routes with `c == u`.
pub fn inclusion_exclusion_freshness(p: FileParams, r: &RouteRates) -> Result<f64> {
    let live = canonical_live(r);
    if live.is_empty() {
        return Ok(0.0);
    }
    if live.len() >= 31 {
        return Err(Error::invalid(
            "inclusion-exclusion supports at most 30 live routes",
        ));
    }
    if let Some(r) = live.iter().find(|r| r.cache == r.user) {
        return Err(Error::invalid(format!(
            "expansion undefined for equal rates c = u = {}",
            r.cache
        )));
    }
    Ok(1.0 - p.lambda * expansion_waiting_time(p.lambda, &live))
}

// P(X_k > x) = c/(c-u) e^{-ux} + u/(u-c) e^{-cx}; the product over routes
// expands into one exponential per choice of rate, each integrated against
// e^{-lambda x}.
fn expansion_waiting_time(lambda: f64, live: &[Route]) -> f64 {
    let k = live.len();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for mask in 0u32..(1u32 << k) {
        let mut weight = 1.0;
        let mut exponent = lambda;
        for (j, r) in live.iter().enumerate() {
            let d = r.cache - r.user;
            if mask & (1 << j) != 0 {
                weight *= -r.user / d;
                exponent += r.cache;
            } else {
                weight *= r.cache / d;
                exponent += r.user;
            }
        }
        // Neumaier summation.
        let term = weight / exponent;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn two_route_closed_form(lambda: f64, first: Route, second: Route) -> f64 {
    let (c1, u1, c2, u2) = (first.cache, first.user, second.cache, second.user);
    let u = u1 + u2;
    let c = c1 + c2;
    let denom = (lambda + u) * (lambda + c);
    u * c / denom - lambda / denom * (u2 * c1 / (lambda + u1 + c2) + u1 * c2 / (lambda + u2 + c1))
}

/// Two-route freshness in average/skew coordinates.
pub fn user_freshness_two_cache(p: FileParams, t: TwoCacheCoords) -> Result<Freshness> {
    let lambda = p.lambda;
    let (u_bar, c_bar, a, b) = (t.u_bar, t.c_bar, t.a, t.b);
    let denom = (lambda + 2.0 * c_bar) * (lambda + 2.0 * u_bar);
    let shared = c_bar + lambda + u_bar;
    let cross =
        (u_bar - b) * (c_bar + a) / (shared + b - a) + (u_bar + b) * (c_bar - a) / (shared + a - b);
    Ok(Freshness::clamped(
        4.0 * c_bar * u_bar / denom - lambda / denom * cross,
    ))
}

/// Cache skew `a*` maximizing two-route freshness for a fixed user skew `b`.
///
/// The stationary point is written in rationalized form
/// `b + (c_bar + lambda + u_bar) b (2 c_bar + lambda) / (A + sqrt(B))` so
/// small `b` does not cancel; `b = 0` gives exactly zero. The result is
/// clamped to `c_bar`.
pub fn optimal_cache_skew(p: FileParams, b: f64, u_bar: f64, c_bar: f64) -> Result<f64> {
    check_rate("b", b)?;
    check_positive("u_bar", u_bar)?;
    check_positive("c_bar", c_bar)?;
    if b > u_bar * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("b = {b} exceeds u_bar = {u_bar}")));
    }
    let b = b.min(u_bar);
    if b == 0.0 {
        return Ok(0.0);
    }
    let lambda = p.lambda;
    let s = 2.0 * c_bar + lambda + u_bar;
    let a_term = u_bar * s - b * b;
    let b_term = ((u_bar - b) * (u_bar + b)).max(0.0) * ((s - b) * (s + b));
    let stationary =
        b + (c_bar + lambda + u_bar) * b * (2.0 * c_bar + lambda) / (a_term + b_term.sqrt());
    Ok(stationary.min(c_bar))
}

/// `E[W_u] = ∫ e^{-lambda x} prod_k P(X_k > x) dx` by adaptive quadrature.
/// With no live route the user is never refreshed and the result is
/// `1 / lambda`.
pub fn waiting_time_quadrature(p: FileParams, r: &RouteRates) -> Result<f64> {
    let live = canonical_live(r);
    Ok(quadrature_waiting_time(p.lambda, &live))
}

/// Ratio of the tail mass beyond the integration cutoff to the integral.
const TAIL_REL_TOL: f64 = 1e-14;

fn quadrature_waiting_time(lambda: f64, live: &[Route]) -> f64 {
    if live.is_empty() {
        return 1.0 / lambda;
    }
    let integrand = |x: f64| -> f64 {
        live.iter().fold((-lambda * x).exp(), |acc, r| {
            acc * survival_unchecked(x, r.cache, r.user)
        })
    };
    let decay = lambda + live.iter().map(|r| r.cache.min(r.user)).sum::<f64>();
    let mut x_max = 16.0 / decay;
    loop {
        let cuts: Vec<f64> = (1..8).map(|j| x_max / f64::from(1u32 << j)).collect();
        let est = quadrature::integrate(integrand, 0.0, x_max, &cuts, Tolerance::default());
        // Every factor is non-increasing, so the tail beyond x_max is at
        // most prod_k S_k(x_max) * e^{-lambda x_max} / lambda.
        let tail = integrand(x_max) / lambda;
        if tail <= TAIL_REL_TOL * est.value || !x_max.is_finite() {
            return (est.value + 0.5 * tail).clamp(0.0, 1.0 / lambda);
        }
        x_max *= 2.0;
    }
}

/// Worst-case relative loss from splitting a file evenly over two routes
/// instead of serving it through one: `lambda / (2 (lambda + u_bar + c_bar))`.
pub fn freshness_loss_ratio(p: FileParams, u_bar: f64, c_bar: f64) -> Result<f64> {
    check_positive("u_bar", u_bar)?;
    check_positive("c_bar", c_bar)?;
    Ok(p.lambda / (2.0 * (p.lambda + u_bar + c_bar)))
}
