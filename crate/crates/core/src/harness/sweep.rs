use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{options_for, presets, run_method, Metrics, Scenario};
use crate::error::{Error, Result};

/// Slack `u_k` for one (demand, latency) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlackPreset {
    pub demand_kbps: f64,
    pub latency_ms: f64,
    pub slack_u_kbps: f64,
}

fn default_latencies() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 1.5, 2.0]
}

fn default_demands() -> Vec<f64> {
    vec![16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]
}

fn default_slack() -> Vec<SlackPreset> {
    presets::slack_table()
}

/// A latency x demand sweep over a base scenario.
///
/// Each cell overwrites `q`, `tau` and `u` of every URLLC user in `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: Scenario,
    #[serde(default = "default_latencies")]
    pub latency_values_ms: Vec<f64>,
    #[serde(default = "default_demands")]
    pub demand_values_kbps: Vec<f64>,
    #[serde(default = "default_slack")]
    pub slack_presets: Vec<SlackPreset>,
    /// Wall time makes output differ between runs, so it is opt-in.
    #[serde(default)]
    pub record_wall_time: bool,
}

const KEY_TOL: f64 = 1e-9;

impl SweepSpec {
    pub fn from_json(text: &str) -> serde_json::Result<SweepSpec> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<SweepSpec> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        SweepSpec::from_json(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })
    }

    pub fn slack_for(&self, demand_kbps: f64, latency_ms: f64) -> Result<f64> {
        self.slack_presets
            .iter()
            .find(|p| (p.demand_kbps - demand_kbps).abs() <= KEY_TOL && (p.latency_ms - latency_ms).abs() <= KEY_TOL)
            .map(|p| p.slack_u_kbps)
            .ok_or(Error::MissingSlackPreset {
                demand_kbps,
                latency_ms,
            })
    }

    pub fn validate(&self) -> Result<()> {
        if self.latency_values_ms.is_empty() || self.demand_values_kbps.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep needs at least one latency and one demand".into(),
            ));
        }
        for &v in self.latency_values_ms.iter().chain(&self.demand_values_kbps) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("sweep values must be positive, got {v}")));
            }
        }
        for p in &self.slack_presets {
            if !(p.slack_u_kbps.is_finite() && p.slack_u_kbps >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "slack for ({}, {}) must be non-negative",
                    p.demand_kbps, p.latency_ms
                )));
            }
        }
        for &d in &self.demand_values_kbps {
            for &l in &self.latency_values_ms {
                self.slack_for(d, l)?;
            }
        }
        let (d, l) = (self.demand_values_kbps[0], self.latency_values_ms[0]);
        self.cell_scenario(d, l)?.validate()
    }

    /// The base scenario with every URLLC user set to one sweep cell.
    pub fn cell_scenario(&self, demand_kbps: f64, latency_ms: f64) -> Result<Scenario> {
        let slack = self.slack_for(demand_kbps, latency_ms)?;
        let mut scenario = self.base.clone();
        for u in scenario.users.iter_mut().filter(|u| u.is_urllc()) {
            u.demand_q_kbps = demand_kbps;
            u.latency_tau_ms = Some(latency_ms);
            u.slack_u_kbps = Some(slack);
        }
        if let Some(r) = scenario.random_users.as_mut() {
            r.demand_q_kbps = demand_kbps;
            r.latency_tau_ms = latency_ms;
            r.slack_u_kbps = slack;
        }
        Ok(scenario)
    }

    pub fn cells(&self) -> Vec<(f64, f64)> {
        let mut cells = Vec::with_capacity(self.demand_values_kbps.len() * self.latency_values_ms.len());
        for &d in &self.demand_values_kbps {
            for &l in &self.latency_values_ms {
                cells.push((d, l));
            }
        }
        cells
    }
}

fn run_cell(spec: &SweepSpec, node_limit: Option<u64>, (demand, latency): (f64, f64)) -> Result<Vec<Metrics>> {
    let scenario = spec.cell_scenario(demand, latency)?;
    let prepared = scenario.prepare()?;
    let options = options_for(&scenario, node_limit, spec.record_wall_time);
    let mut methods = scenario.methods.clone();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|m| {
            run_method(&prepared, m, &options).map(|o| Metrics {
                demand_kbps: Some(demand),
                latency_ms: Some(latency),
                ..o.metrics
            })
        })
        .collect()
}

/// Runs every cell. Rows come back sorted by (demand, latency, method).
pub fn sweep(spec: &SweepSpec, node_limit: Option<u64>) -> Result<Vec<Metrics>> {
    spec.validate()?;
    let cells = spec.cells();

    #[cfg(feature = "parallel")]
    let per_cell: Vec<Result<Vec<Metrics>>> = {
        use rayon::prelude::*;
        cells.par_iter().map(|&c| run_cell(spec, node_limit, c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_cell: Vec<Result<Vec<Metrics>>> = cells.iter().map(|&c| run_cell(spec, node_limit, c)).collect();

    let mut rows = Vec::new();
    for cell in per_cell {
        rows.extend(cell?);
    }
    super::output::sort_rows(&mut rows);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use crate::harness::Method;
    use crate::rate::{RateModelParams, User};

    fn tiny_spec() -> SweepSpec {
        SweepSpec {
            base: Scenario {
                grid: GridConfig::new(4, 4, 1, &[0, 1]),
                users: vec![User::urllc(0, 2.0, 1.0, 1.0, 0.0), User::embb(1, 1.0)],
                random_users: None,
                rate_params: RateModelParams::default(),
                methods: vec![Method::Heuristic, Method::P0],
                seed: 0,
                node_limit: None,
            },
            latency_values_ms: vec![1.0, 0.5],
            demand_values_kbps: vec![32.0, 16.0],
            slack_presets: default_slack(),
            record_wall_time: false,
        }
    }

    #[test]
    fn rows_are_sorted_and_complete() {
        let rows = sweep(&tiny_spec(), None).unwrap();
        assert_eq!(rows.len(), 8);
        let keys: Vec<_> = rows
            .iter()
            .map(|r| (r.demand_kbps.unwrap(), r.latency_ms.unwrap(), r.method))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(keys, sorted);
        assert!(rows.iter().all(|r| r.wall_time_s.is_none()));
    }

    #[test]
    fn cell_overrides_urllc_users_only() {
        let s = tiny_spec().cell_scenario(64.0, 0.5).unwrap();
        assert_eq!(s.users[0].demand_q_kbps, 64.0);
        assert_eq!(s.users[0].latency_tau_ms, Some(0.5));
        assert_eq!(s.users[0].slack_u_kbps, Some(116.0));
        assert_eq!(s.users[1], User::embb(1, 1.0));
    }

    #[test]
    fn missing_slack_is_a_config_error() {
        let mut spec = tiny_spec();
        spec.latency_values_ms.push(3.0);
        assert!(matches!(spec.validate(), Err(Error::MissingSlackPreset { .. })));
    }

    #[test]
    fn default_table_covers_default_axes() {
        let spec = SweepSpec {
            latency_values_ms: default_latencies(),
            demand_values_kbps: default_demands(),
            ..tiny_spec()
        };
        assert_eq!(spec.cells().len(), 35);
        for (d, l) in spec.cells() {
            spec.slack_for(d, l).unwrap();
        }
        assert_eq!(spec.slack_for(1024.0, 2.0).unwrap(), 176.0);
        assert_eq!(spec.slack_for(256.0, 1.5).unwrap(), 124.0);
    }
}
