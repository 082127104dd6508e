//! Depth-first branch-and-bound over the binary variables.
//!
//! Variables are branched in instance order (block id, then user id), the
//! `x = 1` child first. Every node's partial assignment, completed with zeros,
//! is offered as an incumbent, so incumbents are found in increasing
//! lexicographic order of their sorted assignment lists and only strict
//! improvements replace them: among equal-objective optima the
//! lexicographically smallest assignment set is returned.
//!
//! Users that are indistinguishable (same class, demand, cap and rate column)
//! are interchangeable; the search only lets such a user take a block after
//! its lower-id twin holds one, which keeps exactly the lexicographically
//! smallest member of every symmetric family.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::bound::{best_sums_under_cap, merge_group, min_count_reaching, prefix_sums};
use super::{Allocation, Formulation, IlpInstance, Sense};
use crate::error::{Error, Result};
use crate::rate::EPS_RATE;

pub const DEFAULT_NODE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Present unless `Infeasible`; for `NodeLimit`, the incumbent if one was found.
    pub allocation: Option<Allocation>,
    pub nodes_explored: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub node_limit: u64,
    /// Skip assignments that only relabel interchangeable users.
    pub symmetry_breaking: bool,
    /// Prune with the node upper bound. Without it only infeasibility prunes.
    pub bounding: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            node_limit: DEFAULT_NODE_LIMIT,
            symmetry_breaking: true,
            bounding: true,
        }
    }
}

/// Solves `instance` to optimality, or stops after `node_limit` nodes.
pub fn solve_exact(instance: &IlpInstance, node_limit: u64) -> Result<SolveResult> {
    solve_exact_with(
        instance,
        &SolverOptions {
            node_limit,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_exact_with(instance: &IlpInstance, options: &SolverOptions) -> Result<SolveResult> {
    if options.node_limit == 0 {
        return Err(Error::InvalidNodeLimit);
    }
    let started = clock::now();
    let mut search = Search::new(instance, *options);
    search.dfs(0);

    let nodes_explored = search.nodes.min(options.node_limit);
    let status = if search.aborted {
        SolveStatus::NodeLimit
    } else if search.best.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    };
    let allocation = match search.best {
        Some((_, chosen)) => Some(instance.allocation_from_pairs(chosen.iter().map(|&v| {
            let var = instance.variables[v];
            (var.block, var.user)
        }))?),
        None => None,
    };
    Ok(SolveResult {
        status,
        allocation,
        nodes_explored,
        wall_time_s: clock::elapsed_s(started),
    })
}

/// Reusable buffers for the bound computation.
#[derive(Default)]
struct Scratch {
    block_best: Vec<f64>,
    touched: Vec<usize>,
    group_rates: Vec<Vec<f64>>,
    usable: FixedBitSet,
    /// Free mini-slots reachable by each constrained user's candidates.
    regions: Vec<FixedBitSet>,
    region_blocks: Vec<usize>,
    region_union: FixedBitSet,
    values: Vec<f64>,
    table: Vec<f64>,
    merged: Vec<f64>,
    group: Vec<f64>,
    /// Best total of the capped users by joint block count.
    capped: Vec<f64>,
}

struct Search<'a> {
    inst: &'a IlpInstance,
    opts: SolverOptions,
    occupied: FixedBitSet,
    served: Vec<f64>,
    held: Vec<u32>,
    /// P0 lower bound per user (0 when unconstrained).
    need: Vec<f64>,
    /// P1 upper bound per user (infinite when unconstrained).
    cap: Vec<f64>,
    constrained: Vec<bool>,
    twin: Vec<Option<usize>>,
    chosen: Vec<usize>,
    obj: f64,
    best: Option<(f64, Vec<usize>)>,
    nodes: u64,
    aborted: bool,
    scratch: Scratch,
}

impl<'a> Search<'a> {
    fn new(inst: &'a IlpInstance, opts: SolverOptions) -> Self {
        let users = inst.user_count();
        let mut need = vec![0.0; users];
        let mut cap = vec![f64::INFINITY; users];
        let mut constrained = vec![false; users];
        for row in &inst.demand_constraints {
            constrained[row.user] = true;
            match row.sense {
                Sense::AtLeast => need[row.user] = row.bound_kbps,
                Sense::AtMost => cap[row.user] = row.bound_kbps,
            }
        }

        let mut twin = vec![None; users];
        if opts.symmetry_breaking {
            let same_column =
                |i: usize, j: usize| (0..inst.block_count()).all(|b| inst.rates.get(b, i) == inst.rates.get(b, j));
            for j in 0..users {
                twin[j] = (0..j).rev().find(|&i| {
                    inst.classes[i] == inst.classes[j]
                        && constrained[i] == constrained[j]
                        && need[i] == need[j]
                        && cap[i] == cap[j]
                        && same_column(i, j)
                });
            }
        }

        let scratch = Scratch {
            block_best: vec![f64::NEG_INFINITY; inst.block_count()],
            group_rates: vec![Vec::new(); users],
            usable: FixedBitSet::with_capacity(inst.slot_count()),
            regions: vec![FixedBitSet::with_capacity(inst.slot_count()); users],
            region_blocks: vec![0; users],
            region_union: FixedBitSet::with_capacity(inst.slot_count()),
            ..Scratch::default()
        };

        Search {
            inst,
            opts,
            occupied: FixedBitSet::with_capacity(inst.slot_count()),
            served: vec![0.0; users],
            held: vec![0; users],
            need,
            cap,
            constrained,
            twin,
            chosen: Vec::new(),
            obj: 0.0,
            best: None,
            nodes: 0,
            aborted: false,
            scratch,
        }
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes > self.opts.node_limit {
            self.aborted = true;
        }
        !self.aborted
    }

    /// Assignable now, ignoring the twin rule.
    fn admissible(&self, v: usize) -> bool {
        let var = self.inst.variables[v];
        self.served[var.user] + var.rate_kbps <= self.cap[var.user] + EPS_RATE
            && self.inst.block_cover[var.block].is_disjoint(&self.occupied)
    }

    fn placeable(&self, v: usize) -> bool {
        let user = self.inst.variables[v].user;
        // A block worth nothing in the objective only helps while its user still falls short.
        let useful = self.inst.objective[v] > 0.0 || self.served[user] < self.need[user] - EPS_RATE;
        useful && self.twin[user].is_none_or(|t| self.held[t] > 0) && self.admissible(v)
    }

    fn assign(&mut self, v: usize) {
        let var = self.inst.variables[v];
        self.occupied.union_with(&self.inst.block_cover[var.block]);
        self.served[var.user] += var.rate_kbps;
        self.held[var.user] += 1;
        self.obj += self.inst.objective[v];
        self.chosen.push(v);
    }

    fn unassign(&mut self, v: usize) {
        let var = self.inst.variables[v];
        self.occupied.difference_with(&self.inst.block_cover[var.block]);
        self.served[var.user] -= var.rate_kbps;
        self.held[var.user] -= 1;
        self.obj -= self.inst.objective[v];
        self.chosen.pop();
    }

    fn offer_incumbent(&mut self) {
        let meets = (0..self.served.len()).all(|u| self.served[u] >= self.need[u] - EPS_RATE);
        if !meets {
            return;
        }
        if self.best.as_ref().is_none_or(|(b, _)| self.obj > b + EPS_RATE) {
            self.best = Some((self.obj, self.chosen.clone()));
        }
    }

    fn dfs(&mut self, start: usize) {
        if !self.tick() {
            return;
        }
        self.offer_incumbent();
        let n = self.inst.variables.len();
        let mut idx = start;
        loop {
            while idx < n && !self.placeable(idx) {
                idx += 1;
            }
            if idx >= n || self.prune(idx) {
                return;
            }
            self.assign(idx);
            self.dfs(idx + 1);
            self.unassign(idx);
            if self.aborted {
                return;
            }
            // x = 0 child
            idx += 1;
            if !self.tick() {
                return;
            }
        }
    }

    fn prune(&mut self, idx: usize) -> bool {
        if !self.opts.bounding {
            return false;
        }
        match self.upper_bound(idx) {
            None => true,
            Some(ub) => self.best.as_ref().is_some_and(|(b, _)| ub <= b + EPS_RATE),
        }
    }

    /// Upper bound on the objective of any completion that only sets variables
    /// at or after `idx`; `None` when no completion can meet the P0 demands.
    fn upper_bound(&mut self, idx: usize) -> Option<f64> {
        let inst = self.inst;
        let mut s = std::mem::take(&mut self.scratch);
        for &b in &s.touched {
            s.block_best[b] = f64::NEG_INFINITY;
        }
        s.touched.clear();
        for rates in &mut s.group_rates {
            rates.clear();
        }
        for region in &mut s.regions {
            region.clear();
        }
        s.region_blocks.fill(0);
        s.usable.clear();

        let mut min_area = usize::MAX;
        for v in idx..inst.variables.len() {
            if !self.admissible(v) {
                continue;
            }
            let var = inst.variables[v];
            if s.block_best[var.block] == f64::NEG_INFINITY {
                s.touched.push(var.block);
                s.block_best[var.block] = f64::MIN;
                let cover = &inst.block_cover[var.block];
                s.usable.union_with(cover);
                min_area = min_area.min(cover.count_ones(..));
            }
            if self.constrained[var.user] {
                s.group_rates[var.user].push(var.rate_kbps);
                s.regions[var.user].union_with(&inst.block_cover[var.block]);
                s.region_blocks[var.user] += 1;
            } else if inst.objective[v] > s.block_best[var.block] {
                s.block_best[var.block] = inst.objective[v];
            }
        }

        let capacity = if s.touched.is_empty() {
            0
        } else {
            (s.usable.count_ones(..) / min_area.max(1)).min(s.touched.len())
        };

        s.values.clear();
        s.values
            .extend(s.touched.iter().map(|&b| s.block_best[b]).filter(|&c| c > f64::MIN));
        s.values.sort_by(|a, b| b.total_cmp(a));
        prefix_sums(&s.values, &mut s.group);
        s.table.clear();
        s.table.extend((0..=capacity).map(|c| s.group[c.min(s.values.len())]));

        // Blocks a constrained user can still receive, from the free slots its candidates reach.
        let area = min_area.max(1);
        let region_capacity = |s: &Scratch, u: usize| {
            (s.regions[u].count_ones(..) / area)
                .min(s.region_blocks[u])
                .min(capacity)
        };

        let mut result = Some(0.0);
        match inst.formulation {
            Formulation::P0 => {
                let mut reserved = 0usize;
                s.region_union.clear();
                for u in 0..self.served.len() {
                    let need = self.need[u] - self.served[u];
                    if need <= EPS_RATE {
                        continue;
                    }
                    let reach = region_capacity(&s, u);
                    let rates = &mut s.group_rates[u];
                    rates.sort_by(|a, b| b.total_cmp(a));
                    match min_count_reaching(rates, need) {
                        Some(m) if m <= reach => reserved += m,
                        _ => {
                            result = None;
                            break;
                        }
                    }
                    let Scratch {
                        regions, region_union, ..
                    } = &mut s;
                    region_union.union_with(&regions[u]);
                }
                if result.is_some() {
                    let joint = s.region_union.count_ones(..) / area;
                    result = if reserved > capacity || reserved > joint {
                        None
                    } else {
                        Some(s.table[capacity - reserved])
                    };
                }
            }
            Formulation::P1 => {
                // Capped users' blocks all sit inside the union of their regions.
                s.region_union.clear();
                for u in 0..self.served.len() {
                    if self.constrained[u] {
                        let Scratch {
                            regions, region_union, ..
                        } = &mut s;
                        region_union.union_with(&regions[u]);
                    }
                }
                let joint = (s.region_union.count_ones(..) / area).min(capacity);
                s.capped.clear();
                s.capped.resize(joint + 1, 0.0);
                for u in 0..self.served.len() {
                    if !self.constrained[u] || s.group_rates[u].is_empty() {
                        continue;
                    }
                    let cap_left = (self.cap[u] - self.served[u]).max(0.0);
                    let reach = region_capacity(&s, u).min(joint);
                    let rates = &mut s.group_rates[u];
                    rates.sort_by(|a, b| b.total_cmp(a));
                    best_sums_under_cap(rates, cap_left, reach, &mut s.group);
                    merge_group(&s.capped, &s.group, &mut s.merged);
                    std::mem::swap(&mut s.capped, &mut s.merged);
                }
                let best = (0..=joint)
                    .map(|j| s.capped[j] + s.table[capacity - j])
                    .fold(f64::NEG_INFINITY, f64::max);
                result = Some(best);
            }
        }

        self.scratch = s;
        result.map(|extra| self.obj + extra)
    }
}

mod clock {
    #[cfg(not(target_arch = "wasm32"))]
    pub type Instant = std::time::Instant;
    #[cfg(target_arch = "wasm32")]
    pub type Instant = ();

    #[cfg(not(target_arch = "wasm32"))]
    pub fn now() -> Instant {
        std::time::Instant::now()
    }
    #[cfg(target_arch = "wasm32")]
    pub fn now() -> Instant {}

    #[cfg(not(target_arch = "wasm32"))]
    pub fn elapsed_s(start: Instant) -> f64 {
        start.elapsed().as_secs_f64()
    }
    #[cfg(target_arch = "wasm32")]
    pub fn elapsed_s(_start: Instant) -> f64 {
        0.0
    }
}
