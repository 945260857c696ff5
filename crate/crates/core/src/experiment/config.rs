//! Experiment configuration files.
//!
//! Configurations are TOML documents:
//!
//! ```toml
//! mode = "optimize"        # eval | optimize | simulate | reproduce-paper
//! cycles = 1000000         # source cycles per file when simulating
//! seed = 42
//! output = "results"       # optional output directory
//!
//! [system]
//! routes = 5               # K, must match route_budgets when given as a list
//! files = 30               # N
//! cache_budget = 50.0      # C, shared by all source -> cache links
//! route_budgets = 20.0     # U_k: one number for every route, or a list of K
//!
//! [system.geometric]       # lambda_i = b q^i, i = 1..N, summing to `total`
//! total = 100.0
//! ratio = 0.7
//! ```
//!
//! Instead of `[system.geometric]` the source rates may be listed directly
//! as `lambdas = [...]` under `[system]`. The `eval` mode also needs an
//! `[allocation]` table with `user` and `cache`, each a list of K rows of
//! N rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{AllocationMatrix, SystemConfig};

pub const DEFAULT_CYCLES: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;

/// The parameter set used for the published numerical example.
pub const PAPER_PRESET: &str = r#"mode = "reproduce-paper"
cycles = 1000000
seed = 42

[system]
routes = 5
files = 30
cache_budget = 50.0
route_budgets = 20.0

[system.geometric]
total = 100.0
ratio = 0.7
"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Eval,
    #[default]
    Optimize,
    Simulate,
    ReproducePaper,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Eval => "eval",
            Mode::Optimize => "optimize",
            Mode::Simulate => "simulate",
            Mode::ReproducePaper => "reproduce-paper",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Budgets {
    Uniform(f64),
    PerRoute(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometric {
    pub total: f64,
    pub ratio: f64,
}

impl Geometric {
    /// `lambda_i = b q^i` for `i = 1..=n` with `b = a (1 - q) / (q (1 - q^n))`.
    pub fn expand(&self, n: usize) -> Vec<f64> {
        let (a, q) = (self.total, self.ratio);
        let scale = a * (1.0 - q) / (q * (1.0 - q.powi(n as i32)));
        (1..=n).map(|i| scale * q.powi(i as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    routes: Option<usize>,
    files: usize,
    cache_budget: f64,
    route_budgets: Budgets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    geometric: Option<Geometric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAllocation {
    user: Vec<Vec<f64>>,
    cache: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    mode: Mode,
    #[serde(default = "default_cycles")]
    cycles: u64,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    system: RawSystem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    allocation: Option<RawAllocation>,
}

fn default_cycles() -> u64 {
    DEFAULT_CYCLES
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// How the source rates were given, kept so a config serializes back to
/// the form it was written in.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpec {
    Explicit(Vec<f64>),
    Geometric(Geometric),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub lambda_spec: LambdaSpec,
    pub budgets: Budgets,
    pub mode: Mode,
    pub cycles: u64,
    pub seed: u64,
    pub output_path: Option<String>,
    pub allocation: Option<AllocationMatrix>,
}

impl ExperimentConfig {
    pub fn paper_preset() -> Self {
        parse_config(PAPER_PRESET).expect("preset is valid")
    }

    /// Writes the config back in the file format accepted by [`parse_config`].
    pub fn to_toml_string(&self) -> Result<String> {
        let (lambdas, geometric) = match &self.lambda_spec {
            LambdaSpec::Explicit(l) => (Some(l.clone()), None),
            LambdaSpec::Geometric(g) => (None, Some(*g)),
        };
        let raw = RawConfig {
            mode: self.mode,
            cycles: self.cycles,
            seed: self.seed,
            output: self.output_path.clone(),
            system: RawSystem {
                routes: Some(self.system.routes()),
                files: self.system.files(),
                cache_budget: self.system.cache_budget(),
                route_budgets: self.budgets.clone(),
                lambdas,
                geometric,
            },
            allocation: self.allocation.as_ref().map(|a| RawAllocation {
                user: a.user_rows(),
                cache: a.cache_rows(),
            }),
        };
        toml::to_string(&raw).map_err(|e| Error::Serialize(e.to_string()))
    }
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::parse(
            field,
            format!("must be a positive finite number, got {value}"),
        ))
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(raw_text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(raw_text).map_err(|e| {
        let message = e.message().to_string();
        let field = e
            .span()
            .map(|s| format!("<input bytes {}..{}>", s.start, s.end))
            .unwrap_or_else(|| "<document>".to_string());
        Error::parse(field, message)
    })?;
    let sys = &raw.system;

    if sys.files == 0 {
        return Err(Error::parse("system.files", "must be at least 1"));
    }
    let route_budgets = match &sys.route_budgets {
        Budgets::Uniform(u) => {
            positive("system.route_budgets", *u)?;
            let k = sys.routes.ok_or_else(|| {
                Error::parse(
                    "system.routes",
                    "required when route_budgets is a single number",
                )
            })?;
            vec![*u; k]
        }
        Budgets::PerRoute(list) => {
            for (k, &u) in list.iter().enumerate() {
                positive(&format!("system.route_budgets[{k}]"), u)?;
            }
            list.clone()
        }
    };
    if route_budgets.is_empty() {
        return Err(Error::parse("system.routes", "must be at least 1"));
    }
    if let Some(k) = sys.routes {
        if k != route_budgets.len() {
            return Err(Error::parse(
                "system.route_budgets",
                format!("has {} entries but routes = {k}", route_budgets.len()),
            ));
        }
    }
    positive("system.cache_budget", sys.cache_budget)?;

    let (lambdas, lambda_spec) = match (&sys.lambdas, &sys.geometric) {
        (Some(_), Some(_)) => {
            return Err(Error::parse(
                "system",
                "give either lambdas or geometric, not both",
            ));
        }
        (None, None) => {
            return Err(Error::parse(
                "system.lambdas",
                "missing (or give [system.geometric])",
            ))
        }
        (Some(l), None) => {
            if l.len() != sys.files {
                return Err(Error::parse(
                    "system.lambdas",
                    format!("has {} entries but files = {}", l.len(), sys.files),
                ));
            }
            for (i, &x) in l.iter().enumerate() {
                positive(&format!("system.lambdas[{i}]"), x)?;
            }
            (l.clone(), LambdaSpec::Explicit(l.clone()))
        }
        (None, Some(g)) => {
            positive("system.geometric.total", g.total)?;
            if !(g.ratio > 0.0 && g.ratio < 1.0) {
                return Err(Error::parse(
                    "system.geometric.ratio",
                    format!("must lie strictly between 0 and 1, got {}", g.ratio),
                ));
            }
            (g.expand(sys.files), LambdaSpec::Geometric(*g))
        }
    };

    let system = SystemConfig::new(lambdas, sys.cache_budget, route_budgets)
        .map_err(|e| Error::parse("system", e.to_string()))?;

    let allocation = raw
        .allocation
        .as_ref()
        .map(|a| {
            let m = AllocationMatrix::from_rows(&a.user, &a.cache)
                .map_err(|e| Error::parse("allocation", e.to_string()))?;
            if m.routes() != system.routes() || m.files() != system.files() {
                return Err(Error::parse(
                    "allocation",
                    format!(
                        "is {}x{} but the system has {} routes and {} files",
                        m.routes(),
                        m.files(),
                        system.routes(),
                        system.files()
                    ),
                ));
            }
            Ok(m)
        })
        .transpose()?;

    if raw.mode == Mode::Eval && allocation.is_none() {
        return Err(Error::parse("allocation", "required in eval mode"));
    }
    if raw.cycles == 0 {
        return Err(Error::parse("cycles", "must be at least 1"));
    }

    Ok(ExperimentConfig {
        system,
        lambda_spec,
        budgets: sys.route_budgets.clone(),
        mode: raw.mode,
        cycles: raw.cycles,
        seed: raw.seed,
        output_path: raw.output,
        allocation,
    })
}
