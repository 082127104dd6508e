//! Users, the per-(block, user) achievable throughput `r_{b,k}`, and the URLLC
//! latency mask.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ResourceBlock};

/// Absolute tolerance (kbps) for every rate/demand comparison downstream.
pub const EPS_RATE: f64 = 1e-9;

/// Slack on the deadline comparison so that `end == tau` survives float rounding.
const DEADLINE_EPS_S: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ServiceClass {
    #[serde(rename = "embb")]
    Embb,
    #[serde(rename = "urllc")]
    Urllc,
}

/// An eMBB or URLLC service `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub id: usize,
    pub service_class: ServiceClass,
    /// bits/s/Hz.
    pub spectral_efficiency: f64,
    /// `q_k` in kbps; zero for eMBB.
    #[serde(default)]
    pub demand_q_kbps: f64,
    /// `tau_k` in ms; `None` means unbounded (eMBB).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_tau_ms: Option<f64>,
    /// `u_k` in kbps, only meaningful for URLLC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack_u_kbps: Option<f64>,
}

impl User {
    pub fn embb(id: usize, spectral_efficiency: f64) -> Self {
        User {
            id,
            service_class: ServiceClass::Embb,
            spectral_efficiency,
            demand_q_kbps: 0.0,
            latency_tau_ms: None,
            slack_u_kbps: None,
        }
    }

    pub fn urllc(
        id: usize,
        spectral_efficiency: f64,
        demand_q_kbps: f64,
        latency_tau_ms: f64,
        slack_u_kbps: f64,
    ) -> Self {
        User {
            id,
            service_class: ServiceClass::Urllc,
            spectral_efficiency,
            demand_q_kbps,
            latency_tau_ms: Some(latency_tau_ms),
            slack_u_kbps: Some(slack_u_kbps),
        }
    }

    pub fn is_urllc(&self) -> bool {
        self.service_class == ServiceClass::Urllc
    }

    pub fn is_embb(&self) -> bool {
        self.service_class == ServiceClass::Embb
    }

    /// `q'_k = q_k + u_k`, the soft cap used by P1.
    pub fn demand_cap_kbps(&self) -> Option<f64> {
        self.slack_u_kbps.map(|u| self.demand_q_kbps + u)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("user {}: {msg}", self.id)));
        if !(self.spectral_efficiency.is_finite() && self.spectral_efficiency >= 0.0) {
            return bad(format!(
                "spectral_efficiency must be >= 0, got {}",
                self.spectral_efficiency
            ));
        }
        match self.service_class {
            ServiceClass::Embb => {
                if self.latency_tau_ms.is_some() {
                    return bad("eMBB users have unbounded latency".into());
                }
                if self.slack_u_kbps.is_some_and(|u| u != 0.0) {
                    return bad("eMBB users carry no slack".into());
                }
                if self.demand_q_kbps != 0.0 {
                    return bad("eMBB users carry no demand".into());
                }
            }
            ServiceClass::Urllc => {
                match self.latency_tau_ms {
                    Some(tau) if tau.is_finite() && tau > 0.0 => {}
                    other => return bad(format!("URLLC latency must be finite and > 0, got {other:?}")),
                }
                if !(self.demand_q_kbps.is_finite() && self.demand_q_kbps > 0.0) {
                    return bad(format!("URLLC demand must be > 0, got {}", self.demand_q_kbps));
                }
                if let Some(u) = self.slack_u_kbps {
                    if !(u.is_finite() && u >= 0.0) {
                        return bad(format!("slack must be >= 0, got {u}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Checks every user and that ids are dense and match list positions.
pub fn validate_users(users: &[User]) -> Result<()> {
    for (pos, user) in users.iter().enumerate() {
        if user.id != pos {
            return Err(Error::InvalidConfig(format!(
                "user ids must be dense and ordered: position {pos} holds id {}",
                user.id
            )));
        }
        user.validate()?;
    }
    Ok(())
}

fn default_frame_ms() -> f64 {
    2.0
}

/// Overhead stand-in and the time base used to express rates in kbps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateModelParams {
    /// Control-channel overhead fraction keyed by `mu`; missing entries are 0.
    #[serde(default)]
    pub ctrl_overhead: BTreeMap<u32, f64>,
    /// Window over which scheduled bits are turned into kbps.
    #[serde(default = "default_frame_ms")]
    pub frame_duration_ms: f64,
}

impl Default for RateModelParams {
    fn default() -> Self {
        RateModelParams {
            ctrl_overhead: BTreeMap::new(),
            frame_duration_ms: default_frame_ms(),
        }
    }
}

impl RateModelParams {
    pub fn with_frame_ms(frame_duration_ms: f64) -> Self {
        RateModelParams {
            frame_duration_ms,
            ..Default::default()
        }
    }

    pub fn ctrl_overhead(&self, mu: u32) -> f64 {
        self.ctrl_overhead.get(&mu).copied().unwrap_or(0.0)
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.frame_duration_ms.is_finite() && self.frame_duration_ms > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "frame_duration_ms must be positive, got {}",
                self.frame_duration_ms
            )));
        }
        for (&mu, &ctrl) in &self.ctrl_overhead {
            if !(0.0..1.0).contains(&ctrl) {
                return Err(Error::InvalidConfig(format!(
                    "ctrl_overhead of mu={mu} must lie in [0, 1), got {ctrl}"
                )));
            }
            if grid.numerology(mu).is_none() {
                return Err(Error::InvalidConfig(format!(
                    "ctrl_overhead given for unknown numerology mu={mu}"
                )));
            }
        }
        for n in grid.numerologies() {
            let total = n.cp_overhead + self.ctrl_overhead(n.mu);
            if total >= 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "cp + ctrl overhead of mu={} is {total}, must stay below 1",
                    n.mu
                )));
            }
        }
        Ok(())
    }
}

/// Throughput of `user` on `block` in kbps over one frame, before latency masking.
pub fn achievable_rate(block: &ResourceBlock, user: &User, params: &RateModelParams, grid: &Grid) -> f64 {
    let cp = grid.numerology(block.numerology_mu).map_or(0.0, |n| n.cp_overhead);
    let ctrl = params.ctrl_overhead(block.numerology_mu);
    let bandwidth_hz = block.freq_width as f64 * grid.base_freq_hz();
    let duration_s = block.time_len as f64 * grid.base_time_s();
    let bits = bandwidth_hz * duration_s * user.spectral_efficiency * (1.0 - cp) * (1.0 - ctrl);
    // bits per millisecond == kbps
    bits / params.frame_duration_ms
}

/// Whether `block` ends after URLLC `user`'s deadline. Ending exactly on it is allowed.
pub fn misses_deadline(block: &ResourceBlock, user: &User) -> bool {
    match (user.service_class, user.latency_tau_ms) {
        (ServiceClass::Urllc, Some(tau_ms)) => block.end_time_s > tau_ms * 1e-3 + DEADLINE_EPS_S,
        _ => false,
    }
}

/// Forces the rate to zero when the block would violate the user's latency bound.
pub fn latency_mask(rate: f64, block: &ResourceBlock, user: &User) -> f64 {
    if misses_deadline(block, user) {
        0.0
    } else {
        rate
    }
}

/// Dense `|B| x |K|` matrix of masked rates, row-major by block.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    blocks: usize,
    users: usize,
    entries: Vec<f64>,
}

impl RateMatrix {
    /// Wraps raw row-major entries. Used for synthetic instances.
    pub fn from_entries(blocks: usize, users: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != blocks * users {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {blocks}x{users} rate matrix",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "rate entries must be finite and >= 0, got {bad}"
            )));
        }
        Ok(RateMatrix { blocks, users, entries })
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn get(&self, block: usize, user: usize) -> f64 {
        self.entries[block * self.users + user]
    }

    pub fn row(&self, block: usize) -> &[f64] {
        &self.entries[block * self.users..(block + 1) * self.users]
    }

    pub fn column(&self, user: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.blocks).map(move |b| self.get(b, user))
    }
}

/// `entries[b][k] = latency_mask(achievable_rate(b, k))`.
pub fn build_rate_matrix(grid: &Grid, users: &[User], params: &RateModelParams) -> Result<RateMatrix> {
    if users.is_empty() {
        return Err(Error::InvalidConfig("user list is empty".into()));
    }
    validate_users(users)?;
    params.validate(grid)?;
    let mut entries = Vec::with_capacity(grid.blocks().len() * users.len());
    for block in grid.blocks() {
        for user in users {
            entries.push(latency_mask(achievable_rate(block, user, params, grid), block, user));
        }
    }
    Ok(RateMatrix {
        blocks: grid.blocks().len(),
        users: users.len(),
        entries,
    })
}
