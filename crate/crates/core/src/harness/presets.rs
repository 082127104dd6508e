//! Versioned presets shipped in `configs/` and compiled into the library.

use serde::Deserialize;

use super::{Scenario, SlackPreset, SweepSpec};

pub const DEFAULT_SCENARIO_JSON: &str = include_str!("../../configs/default_scenario.json");
pub const DEFAULT_SWEEP_JSON: &str = include_str!("../../configs/default_sweep.json");
pub const STRESS_SCENARIO_JSON: &str = include_str!("../../configs/stress_scenario.json");
pub const SLACK_PRESETS_JSON: &str = include_str!("../../configs/slack_presets.json");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SlackFile {
    #[allow(dead_code)]
    version: u32,
    presets: Vec<SlackPreset>,
}

/// The (demand, latency) -> `u_k` table used when a sweep spec gives none.
pub fn slack_table() -> Vec<SlackPreset> {
    serde_json::from_str::<SlackFile>(SLACK_PRESETS_JSON)
        .expect("embedded slack table is valid")
        .presets
}

pub fn default_scenario() -> Scenario {
    Scenario::from_json(DEFAULT_SCENARIO_JSON).expect("embedded default scenario is valid")
}

pub fn default_sweep() -> SweepSpec {
    SweepSpec::from_json(DEFAULT_SWEEP_JSON).expect("embedded default sweep is valid")
}

/// A small cell where some URLLC demand cannot be met under tight latency.
pub fn stress_scenario() -> Scenario {
    Scenario::from_json(STRESS_SCENARIO_JSON).expect("embedded stress scenario is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        default_scenario().validate().unwrap();
        stress_scenario().validate().unwrap();
        default_sweep().validate().unwrap();
        assert_eq!(slack_table().len(), 35);
    }

    #[test]
    fn sweep_base_matches_default_scenario() {
        let scenario = default_scenario();
        let base = default_sweep().base;
        assert_eq!(base.grid, scenario.grid);
        assert_eq!(base.rate_params, scenario.rate_params);
        assert_eq!(base.users.len(), scenario.users.len());
        for (a, b) in base.users.iter().zip(&scenario.users) {
            assert_eq!(
                (a.id, a.service_class, a.spectral_efficiency),
                (b.id, b.service_class, b.spectral_efficiency)
            );
        }
    }
}
