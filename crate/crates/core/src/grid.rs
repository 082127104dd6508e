//! Time-frequency mini-slot grid and the candidate resource blocks placed on it.
//!
//! The base grid has `freq_units` rows (F) and `time_units` columns (T). The
//! time unit is the mini-slot of the finest numerology (`mu_max`) and the
//! frequency unit is one PRB of numerology 0, so a numerology `mu` block is a
//! `2^mu x 2^(mu_max - mu)` rectangle and every block covers exactly
//! `2^mu_max` mini-slots.
//!
//! Mini-slots are indexed row-major by frequency: `index = f * T + t`. All
//! downstream tie-breaking follows this order and the block id order.

use std::sync::OnceLock;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted `mu_max`; keeps footprints and areas well inside `usize`.
pub const MAX_MU: u32 = 16;

/// Duration of one reference slot (numerology 0) in seconds.
pub const REFERENCE_SLOT_S: f64 = 1e-3;

/// One PRB of numerology 0 (12 subcarriers at 15 kHz).
pub const DEFAULT_BASE_FREQ_HZ: f64 = 180e3;

/// A numerology entry as written in a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumerologySpec {
    pub mu: u32,
    #[serde(default)]
    pub cp_overhead: f64,
}

/// A numerology resolved against the grid's `mu_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerology {
    pub mu: u32,
    /// Block height in base frequency units (`2^mu`).
    pub freq_width: usize,
    /// Block length in base time units (`2^(mu_max - mu)`).
    pub time_len: usize,
    /// Cyclic-prefix / guard overhead fraction in `[0, 1)`.
    pub cp_overhead: f64,
}

impl Numerology {
    fn resolve(spec: NumerologySpec, mu_max: u32) -> Self {
        Numerology {
            mu: spec.mu,
            freq_width: 1usize << spec.mu,
            time_len: 1usize << (mu_max - spec.mu),
            cp_overhead: spec.cp_overhead,
        }
    }

    pub fn area(&self) -> usize {
        self.freq_width * self.time_len
    }
}

fn default_base_freq_hz() -> f64 {
    DEFAULT_BASE_FREQ_HZ
}

/// Grid geometry as loaded from a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub freq_units: usize,
    pub time_units: usize,
    pub mu_max: u32,
    #[serde(default = "default_base_freq_hz")]
    pub base_freq_hz: f64,
    /// Seconds per base time unit. Defaults to `1 ms / 2^mu_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_time_s: Option<f64>,
    pub numerologies: Vec<NumerologySpec>,
    /// Compute every conflict set at build time instead of on first use.
    #[serde(default)]
    pub precompute_conflicts: bool,
}

impl GridConfig {
    /// A config with default base units and zero cyclic-prefix overhead.
    pub fn new(freq_units: usize, time_units: usize, mu_max: u32, mus: &[u32]) -> Self {
        GridConfig {
            freq_units,
            time_units,
            mu_max,
            base_freq_hz: DEFAULT_BASE_FREQ_HZ,
            base_time_s: None,
            numerologies: mus.iter().map(|&mu| NumerologySpec { mu, cp_overhead: 0.0 }).collect(),
            precompute_conflicts: false,
        }
    }

    pub fn resolved_base_time_s(&self) -> f64 {
        self.base_time_s
            .unwrap_or_else(|| REFERENCE_SLOT_S / (1u64 << self.mu_max.min(MAX_MU)) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freq_units == 0 || self.time_units == 0 {
            return Err(Error::InvalidConfig(format!(
                "grid dimensions must be positive, got F={} T={}",
                self.freq_units, self.time_units
            )));
        }
        if self.mu_max > MAX_MU {
            return Err(Error::InvalidConfig(format!(
                "mu_max {} exceeds the supported maximum {MAX_MU}",
                self.mu_max
            )));
        }
        if self.numerologies.is_empty() {
            return Err(Error::InvalidConfig("numerology list is empty".into()));
        }
        if !(self.base_freq_hz.is_finite() && self.base_freq_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "base_freq_hz must be positive, got {}",
                self.base_freq_hz
            )));
        }
        let base_time = self.resolved_base_time_s();
        if !(base_time.is_finite() && base_time > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "base_time_s must be positive, got {base_time}"
            )));
        }
        let mut seen = Vec::new();
        for n in &self.numerologies {
            if n.mu > self.mu_max {
                return Err(Error::InvalidConfig(format!(
                    "numerology mu={} exceeds mu_max={}",
                    n.mu, self.mu_max
                )));
            }
            if !(0.0..1.0).contains(&n.cp_overhead) {
                return Err(Error::InvalidConfig(format!(
                    "cp_overhead of mu={} must lie in [0, 1), got {}",
                    n.mu, n.cp_overhead
                )));
            }
            if seen.contains(&n.mu) {
                return Err(Error::InvalidConfig(format!("numerology mu={} listed twice", n.mu)));
            }
            seen.push(n.mu);
        }
        Ok(())
    }
}

/// A basic grid cell `i`, addressed by frequency row and time column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MiniSlot {
    pub f: usize,
    pub t: usize,
}

/// One candidate placement `b` of a numerology footprint on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceBlock {
    pub id: usize,
    pub numerology_mu: u32,
    pub f0: usize,
    pub t0: usize,
    pub freq_width: usize,
    pub time_len: usize,
    /// Mini-slot indices covered by the block (the `alpha_{b,i}` row).
    pub covered: FixedBitSet,
    /// Absolute end time of the block within the frame, in seconds.
    pub end_time_s: f64,
}

impl ResourceBlock {
    pub fn area(&self) -> usize {
        self.freq_width * self.time_len
    }

    /// Rectangle membership test, independent of `covered`.
    pub fn contains(&self, slot: MiniSlot) -> bool {
        (self.f0..self.f0 + self.freq_width).contains(&slot.f) && (self.t0..self.t0 + self.time_len).contains(&slot.t)
    }

    pub fn overlaps(&self, other: &ResourceBlock) -> bool {
        !self.covered.is_disjoint(&other.covered)
    }
}

/// Immutable grid: mini-slot identities, numerology table and the full block list.
#[derive(Debug)]
pub struct Grid {
    config: GridConfig,
    numerologies: Vec<Numerology>,
    base_time_s: f64,
    blocks: Vec<ResourceBlock>,
    conflicts: Vec<OnceLock<FixedBitSet>>,
}

impl Grid {
    /// Validates `config` and enumerates every block placement.
    pub fn build(config: GridConfig) -> Result<Grid> {
        config.validate()?;
        let mut numerologies: Vec<Numerology> = config
            .numerologies
            .iter()
            .map(|&spec| Numerology::resolve(spec, config.mu_max))
            .collect();
        numerologies.sort_by_key(|n| n.mu);
        let base_time_s = config.resolved_base_time_s();
        let blocks = enumerate_blocks(config.freq_units, config.time_units, &numerologies, base_time_s);
        let conflicts = (0..blocks.len()).map(|_| OnceLock::new()).collect();
        let grid = Grid {
            config,
            numerologies,
            base_time_s,
            blocks,
            conflicts,
        };
        if grid.config.precompute_conflicts {
            for id in 0..grid.blocks.len() {
                grid.conflict_bits(id);
            }
        }
        Ok(grid)
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn freq_units(&self) -> usize {
        self.config.freq_units
    }

    pub fn time_units(&self) -> usize {
        self.config.time_units
    }

    pub fn mu_max(&self) -> u32 {
        self.config.mu_max
    }

    /// Mini-slots per block, `2^mu_max`.
    pub fn block_area(&self) -> usize {
        1usize << self.config.mu_max
    }

    pub fn slot_count(&self) -> usize {
        self.config.freq_units * self.config.time_units
    }

    pub fn base_time_s(&self) -> f64 {
        self.base_time_s
    }

    pub fn base_freq_hz(&self) -> f64 {
        self.config.base_freq_hz
    }

    /// Numerologies in increasing `mu`.
    pub fn numerologies(&self) -> &[Numerology] {
        &self.numerologies
    }

    pub fn numerology(&self, mu: u32) -> Option<&Numerology> {
        self.numerologies.iter().find(|n| n.mu == mu)
    }

    /// All blocks ordered by `(mu, f0, t0)`; `blocks()[id].id == id`.
    pub fn blocks(&self) -> &[ResourceBlock] {
        &self.blocks
    }

    pub fn block(&self, id: usize) -> Result<&ResourceBlock> {
        self.blocks.get(id).ok_or(Error::UnknownBlock(id))
    }

    /// Numerologies whose footprint does not fit the grid and so contribute no blocks.
    pub fn empty_numerologies(&self) -> Vec<u32> {
        self.numerologies
            .iter()
            .filter(|n| n.freq_width > self.config.freq_units || n.time_len > self.config.time_units)
            .map(|n| n.mu)
            .collect()
    }

    pub fn slot_index(&self, slot: MiniSlot) -> Result<usize> {
        self.check_slot(slot)?;
        Ok(slot.f * self.config.time_units + slot.t)
    }

    pub fn slot_at(&self, index: usize) -> MiniSlot {
        MiniSlot {
            f: index / self.config.time_units,
            t: index % self.config.time_units,
        }
    }

    fn check_slot(&self, slot: MiniSlot) -> Result<()> {
        if slot.f >= self.config.freq_units || slot.t >= self.config.time_units {
            return Err(Error::SlotOutOfGrid {
                f: slot.f,
                t: slot.t,
                freq_units: self.config.freq_units,
                time_units: self.config.time_units,
            });
        }
        Ok(())
    }

    /// `alpha_{b,i}`: whether block `block_id` includes mini-slot `slot`.
    pub fn covers(&self, block_id: usize, slot: MiniSlot) -> Result<bool> {
        self.check_slot(slot)?;
        Ok(self.block(block_id)?.contains(slot))
    }

    /// Ids of all other blocks sharing at least one mini-slot with `block_id`.
    pub fn conflict_set(&self, block_id: usize) -> Result<Vec<usize>> {
        self.block(block_id)?;
        Ok(self.conflict_bits(block_id).ones().collect())
    }

    /// Conflict set of `block_id` as a bitset over block ids, memoized.
    ///
    /// Panics if `block_id` is out of range.
    pub fn conflict_bits(&self, block_id: usize) -> &FixedBitSet {
        self.conflicts[block_id].get_or_init(|| {
            let me = &self.blocks[block_id];
            let mut set = FixedBitSet::with_capacity(self.blocks.len());
            for other in &self.blocks {
                if other.id != block_id && me.overlaps(other) {
                    set.insert(other.id);
                }
            }
            set
        })
    }
}

fn enumerate_blocks(
    freq_units: usize,
    time_units: usize,
    numerologies: &[Numerology],
    base_time_s: f64,
) -> Vec<ResourceBlock> {
    let slots = freq_units * time_units;
    let mut blocks = Vec::new();
    for n in numerologies {
        if n.freq_width > freq_units || n.time_len > time_units {
            continue;
        }
        for f0 in 0..=freq_units - n.freq_width {
            for t0 in 0..=time_units - n.time_len {
                let mut covered = FixedBitSet::with_capacity(slots);
                for f in f0..f0 + n.freq_width {
                    let row = f * time_units;
                    covered.insert_range(row + t0..row + t0 + n.time_len);
                }
                blocks.push(ResourceBlock {
                    id: blocks.len(),
                    numerology_mu: n.mu,
                    f0,
                    t0,
                    freq_width: n.freq_width,
                    time_len: n.time_len,
                    covered,
                    end_time_s: (t0 + n.time_len) as f64 * base_time_s,
                });
            }
        }
    }
    blocks
}
