//! Scenarios, method runs, sweeps and result emission.

mod output;
pub mod presets;
mod sweep;

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridConfig};
use crate::heuristic::run_heuristic;
use crate::ilp::{
    build_p0, build_p1, solve_exact_with, verify_allocation, Allocation, SolveStatus, SolverOptions, DEFAULT_NODE_LIMIT,
};
use crate::rate::{build_rate_matrix, validate_users, RateMatrix, RateModelParams, ServiceClass, User, EPS_RATE};

pub use output::{csv_string, emit_csv, emit_plot_data, parse_csv, plot_series_text, read_csv, CSV_HEADER};
pub use sweep::{sweep, SlackPreset, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    P0,
    P1,
    Heuristic,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::P0, Method::P1, Method::Heuristic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::P0 => "p0",
            Method::P1 => "p1",
            Method::Heuristic => "heuristic",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricStatus {
    Optimal,
    Infeasible,
    BestEffort,
    NodeLimit,
}

impl MetricStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetricStatus::Optimal => "Optimal",
            MetricStatus::Infeasible => "Infeasible",
            MetricStatus::BestEffort => "BestEffort",
            MetricStatus::NodeLimit => "NodeLimit",
        }
    }

    pub fn parse(s: &str) -> Option<MetricStatus> {
        [
            MetricStatus::Optimal,
            MetricStatus::Infeasible,
            MetricStatus::BestEffort,
            MetricStatus::NodeLimit,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
    }
}

impl From<SolveStatus> for MetricStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Optimal => MetricStatus::Optimal,
            SolveStatus::Infeasible => MetricStatus::Infeasible,
            SolveStatus::NodeLimit => MetricStatus::NodeLimit,
        }
    }
}

/// One result row. Throughput fields are `None` when the method produced no allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub demand_kbps: Option<f64>,
    pub latency_ms: Option<f64>,
    pub method: Method,
    pub status: MetricStatus,
    pub embb_sum_kbps: Option<f64>,
    /// `sum_k min(served_k, q_k) / sum_k q_k` over URLLC users.
    pub urllc_coverage: Option<f64>,
    pub fully_covered: Option<usize>,
    pub wall_time_s: Option<f64>,
    /// Branch-and-bound nodes; exact methods only.
    pub nodes: Option<u64>,
}

/// Users drawn at random from `seed`, appended after the explicit ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomUsers {
    pub embb_count: usize,
    pub urllc_count: usize,
    /// Inclusive `[min, max]` range of spectral efficiencies.
    pub spectral_efficiency: [f64; 2],
    #[serde(default)]
    pub demand_q_kbps: f64,
    #[serde(default)]
    pub latency_tau_ms: f64,
    #[serde(default)]
    pub slack_u_kbps: f64,
}

/// A full experiment configuration, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridConfig,
    #[serde(default)]
    pub users: Vec<User>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_users: Option<RandomUsers>,
    #[serde(default)]
    pub rate_params: RateModelParams,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<u64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> serde_json::Result<Scenario> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Scenario::from_json(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })
    }

    /// Explicit users followed by the seeded random ones.
    pub fn resolved_users(&self) -> Vec<User> {
        let mut users = self.users.clone();
        if let Some(spec) = &self.random_users {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let [lo, hi] = spec.spectral_efficiency;
            let draw = |rng: &mut ChaCha8Rng| if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            for _ in 0..spec.urllc_count {
                let se = draw(&mut rng);
                users.push(User::urllc(
                    users.len(),
                    se,
                    spec.demand_q_kbps,
                    spec.latency_tau_ms,
                    spec.slack_u_kbps,
                ));
            }
            for _ in 0..spec.embb_count {
                let se = draw(&mut rng);
                users.push(User::embb(users.len(), se));
            }
        }
        users
    }

    /// Schema-level and model invariants, without solving anything.
    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    /// Builds the grid and rate matrix after validating everything.
    pub fn prepare(&self) -> Result<Prepared> {
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        if let Some(spec) = &self.random_users {
            let [lo, hi] = spec.spectral_efficiency;
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::InvalidConfig(format!(
                    "random_users.spectral_efficiency must be an ordered non-negative range, got [{lo}, {hi}]"
                )));
            }
        }
        if self.node_limit == Some(0) {
            return Err(Error::InvalidNodeLimit);
        }
        let users = self.resolved_users();
        validate_users(&users)?;
        let grid = Grid::build(self.grid.clone())?;
        let rates = build_rate_matrix(&grid, &users, &self.rate_params)?;
        Ok(Prepared { grid, users, rates })
    }
}

/// A validated scenario ready to run.
#[derive(Debug)]
pub struct Prepared {
    pub grid: Grid,
    pub users: Vec<User>,
    pub rates: RateMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub node_limit: u64,
    pub record_wall_time: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            node_limit: DEFAULT_NODE_LIMIT,
            record_wall_time: true,
        }
    }
}

/// Metrics plus the allocation they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub metrics: Metrics,
    pub allocation: Option<Allocation>,
}

/// The demand and latency shared by every URLLC user, if they agree.
fn uniform_urllc(users: &[User]) -> (Option<f64>, Option<f64>) {
    let mut urllc = users.iter().filter(|u| u.is_urllc());
    let Some(first) = urllc.next() else {
        return (None, None);
    };
    let (q, tau) = (first.demand_q_kbps, first.latency_tau_ms);
    let mut same_q = true;
    let mut same_tau = true;
    for u in urllc {
        same_q &= u.demand_q_kbps == q;
        same_tau &= u.latency_tau_ms == tau;
    }
    (same_q.then_some(q), if same_tau { tau } else { None })
}

/// Coverage ratio and fully-covered count of `served` against the URLLC demands.
pub fn urllc_coverage(users: &[User], served: &[f64]) -> (f64, usize) {
    let mut demand = 0.0;
    let mut covered = 0.0;
    let mut full = 0;
    for u in users.iter().filter(|u| u.is_urllc()) {
        demand += u.demand_q_kbps;
        if served[u.id] >= u.demand_q_kbps - EPS_RATE {
            covered += u.demand_q_kbps;
            full += 1;
        } else {
            covered += served[u.id];
        }
    }
    let ratio = if demand > 0.0 {
        (covered / demand).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (ratio, full)
}

/// Runs one method on a prepared scenario and verifies its allocation.
pub fn run_method(prepared: &Prepared, method: Method, options: &RunOptions) -> Result<MethodOutcome> {
    let Prepared { grid, users, rates } = prepared;
    let classes: Vec<ServiceClass> = users.iter().map(|u| u.service_class).collect();
    let (demand_kbps, latency_ms) = uniform_urllc(users);

    let (status, allocation, nodes, wall) = match method {
        Method::P0 | Method::P1 => {
            let instance = if method == Method::P0 {
                build_p0(grid, users, rates)?
            } else {
                build_p1(grid, users, rates)?
            };
            let result = solve_exact_with(
                &instance,
                &SolverOptions {
                    node_limit: options.node_limit,
                    ..SolverOptions::default()
                },
            )?;
            if let Some(alloc) = &result.allocation {
                let violations = verify_allocation(&instance, alloc)?;
                if !violations.is_empty() {
                    return Err(verification_error(method, &violations));
                }
            }
            (
                MetricStatus::from(result.status),
                result.allocation,
                Some(result.nodes_explored),
                result.wall_time_s,
            )
        }
        Method::Heuristic => {
            let started = clock::now();
            let result = run_heuristic(grid, users, rates)?;
            let wall = clock::elapsed_s(started);
            // Best effort: demand shortfalls are expected, overlaps and bad totals are not.
            let instance = build_p0(grid, users, rates)?;
            let violations: Vec<_> = verify_allocation(&instance, &result.allocation)?
                .into_iter()
                .filter(|v| !matches!(v, crate::ilp::Violation::DemandShortfall { .. }))
                .collect();
            if !violations.is_empty() {
                return Err(verification_error(method, &violations));
            }
            (MetricStatus::BestEffort, Some(result.allocation), None, wall)
        }
    };

    let (embb_sum_kbps, urllc_coverage_ratio, fully_covered) = match &allocation {
        Some(alloc) => {
            let embb = alloc.served_by_class(&classes, ServiceClass::Embb);
            let (ratio, full) = urllc_coverage(users, &alloc.per_user_served_kbps);
            (Some(embb), Some(ratio), Some(full))
        }
        None => (None, None, None),
    };

    Ok(MethodOutcome {
        metrics: Metrics {
            demand_kbps,
            latency_ms,
            method,
            status,
            embb_sum_kbps,
            urllc_coverage: urllc_coverage_ratio,
            fully_covered,
            wall_time_s: options.record_wall_time.then_some(wall),
            nodes,
        },
        allocation,
    })
}

fn verification_error(method: Method, violations: &[crate::ilp::Violation]) -> Error {
    let detail = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
    Error::Verification {
        method: method.to_string(),
        detail,
    }
}

/// Runs every method listed in the scenario.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<Vec<Metrics>> {
    let prepared = scenario.prepare()?;
    scenario
        .methods
        .iter()
        .map(|&m| run_method(&prepared, m, options).map(|o| o.metrics))
        .collect()
}

/// Run options for a scenario: its own node limit unless overridden.
pub fn options_for(scenario: &Scenario, node_limit: Option<u64>, record_wall_time: bool) -> RunOptions {
    RunOptions {
        node_limit: node_limit.or(scenario.node_limit).unwrap_or(DEFAULT_NODE_LIMIT),
        record_wall_time,
    }
}

mod clock {
    #[cfg(not(target_arch = "wasm32"))]
    pub fn now() -> std::time::Instant {
        std::time::Instant::now()
    }
    #[cfg(not(target_arch = "wasm32"))]
    pub fn elapsed_s(start: std::time::Instant) -> f64 {
        start.elapsed().as_secs_f64()
    }
    #[cfg(target_arch = "wasm32")]
    pub fn now() {}
    #[cfg(target_arch = "wasm32")]
    pub fn elapsed_s(_: ()) -> f64 {
        0.0
    }
}
