//! JSON-in, JSON-out bindings behind `www/index.html`.
//!
//! Each exported function has a plain Rust twin returning `Result<String, String>`
//! so the logic is testable natively.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use flexnr::grid::{Grid, GridConfig, ResourceBlock};
use flexnr::harness::{presets, run_method, sweep, Method, Metrics, RunOptions, Scenario, SweepSpec};

/// Keeps the page responsive on scenarios too large to solve exactly.
pub const WEB_NODE_LIMIT: u64 = 200_000;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Rect {
    pub block: usize,
    pub mu: u32,
    pub f0: usize,
    pub t0: usize,
    pub freq_width: usize,
    pub time_len: usize,
}

impl From<&ResourceBlock> for Rect {
    fn from(b: &ResourceBlock) -> Self {
        Rect {
            block: b.id,
            mu: b.numerology_mu,
            f0: b.f0,
            t0: b.t0,
            freq_width: b.freq_width,
            time_len: b.time_len,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Placed {
    #[serde(flatten)]
    pub rect: Rect,
    pub user: usize,
    pub rate_kbps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct UserSummary {
    pub id: usize,
    pub urllc: bool,
    pub demand_kbps: f64,
    pub served_kbps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AllocationView {
    pub freq_units: usize,
    pub time_units: usize,
    pub metrics: Metrics,
    pub users: Vec<UserSummary>,
    pub placed: Vec<Placed>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Neighbourhood {
    pub block: Rect,
    pub conflicts: Vec<Rect>,
}

fn parse_method(method: &str) -> Result<Method, String> {
    Method::parse(method).ok_or_else(|| format!("unknown method {method:?}, expected p0, p1 or heuristic"))
}

fn parse_scenario(json: &str) -> Result<Scenario, String> {
    Scenario::from_json(json).map_err(|e| format!("scenario JSON: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn default_scenario_json() -> String {
    serde_json::to_string_pretty(&presets::stress_scenario()).expect("preset serializes")
}

/// Solves one scenario and returns metrics plus every placed block.
pub fn allocate_json(scenario_json: &str, method: &str) -> Result<String, String> {
    let scenario = parse_scenario(scenario_json)?;
    let method = parse_method(method)?;
    let prepared = scenario.prepare().map_err(|e| e.to_string())?;
    let options = RunOptions {
        node_limit: scenario.node_limit.unwrap_or(WEB_NODE_LIMIT),
        record_wall_time: false,
    };
    let outcome = run_method(&prepared, method, &options).map_err(|e| e.to_string())?;
    let served = outcome
        .allocation
        .as_ref()
        .map(|a| a.per_user_served_kbps.clone())
        .unwrap_or_else(|| vec![0.0; prepared.users.len()]);
    let placed = outcome
        .allocation
        .iter()
        .flat_map(|a| &a.assignments)
        .map(|a| Placed {
            rect: Rect::from(&prepared.grid.blocks()[a.block]),
            user: a.user,
            rate_kbps: prepared.rates.get(a.block, a.user),
        })
        .collect();
    let users = prepared
        .users
        .iter()
        .map(|u| UserSummary {
            id: u.id,
            urllc: u.is_urllc(),
            demand_kbps: u.demand_q_kbps,
            served_kbps: served[u.id],
        })
        .collect();
    to_json(&AllocationView {
        freq_units: prepared.grid.freq_units(),
        time_units: prepared.grid.time_units(),
        metrics: outcome.metrics,
        users,
        placed,
    })
}

/// eMBB throughput against latency tolerance at one demand, one row per (latency, method).
pub fn latency_curve_json(scenario_json: &str, demand_kbps: f64, methods: &str) -> Result<String, String> {
    let mut base = parse_scenario(scenario_json)?;
    base.methods = methods
        .split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(parse_method)
        .collect::<Result<_, _>>()?;
    if base.methods.is_empty() {
        return Err("no methods selected".into());
    }
    let node_limit = base.node_limit.unwrap_or(WEB_NODE_LIMIT);
    let spec = SweepSpec {
        demand_values_kbps: vec![demand_kbps],
        ..SweepSpec::from_json(&format!("{{\"base\": {}}}", to_json(&base)?)).map_err(|e| e.to_string())?
    };
    let rows = sweep(&spec, Some(node_limit)).map_err(|e| e.to_string())?;
    to_json(&rows)
}

/// The block of numerology `mu` anchored at `(f0, t0)` and every block it overlaps.
pub fn conflicts_json(grid_json: &str, mu: u32, f0: usize, t0: usize) -> Result<String, String> {
    let config: GridConfig = serde_json::from_str(grid_json).map_err(|e| format!("grid JSON: {e}"))?;
    let grid = Grid::build(config).map_err(|e| e.to_string())?;
    let block = grid
        .blocks()
        .iter()
        .find(|b| b.numerology_mu == mu && b.f0 == f0 && b.t0 == t0)
        .ok_or_else(|| format!("no mu={mu} block anchored at f={f0}, t={t0}"))?;
    let conflicts = grid
        .conflict_set(block.id)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|id| Rect::from(&grid.blocks()[id]))
        .collect();
    to_json(&Neighbourhood {
        block: Rect::from(block),
        conflicts,
    })
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = defaultScenario)]
pub fn default_scenario() -> String {
    default_scenario_json()
}

#[wasm_bindgen]
pub fn allocate(scenario_json: &str, method: &str) -> Result<String, JsError> {
    js(allocate_json(scenario_json, method))
}

#[wasm_bindgen(js_name = latencyCurve)]
pub fn latency_curve(scenario_json: &str, demand_kbps: f64, methods: &str) -> Result<String, JsError> {
    js(latency_curve_json(scenario_json, demand_kbps, methods))
}

#[wasm_bindgen]
pub fn conflicts(grid_json: &str, mu: u32, f0: usize, t0: usize) -> Result<String, JsError> {
    js(conflicts_json(grid_json, mu, f0, t0))
}
