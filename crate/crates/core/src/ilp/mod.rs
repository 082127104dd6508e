//! Binary programs over the assignment variables `x_{b,k}`.
//!
//! P0 maximizes the eMBB sum rate subject to every URLLC user receiving at
//! least `q_k`. P1 maximizes the rate summed over all users, with each URLLC
//! user capped at `q'_k = q_k + u_k`. Both forbid two assigned blocks from
//! sharing a mini-slot.

mod bound;
mod lp_format;
mod solver;

use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rate::{RateMatrix, ServiceClass, User, EPS_RATE};

pub use solver::{solve_exact, solve_exact_with, SolveResult, SolveStatus, SolverOptions, DEFAULT_NODE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formulation {
    P0,
    P1,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::P0 => "P0",
            Formulation::P1 => "P1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `sum r x >= bound` (P0 demand).
    AtLeast,
    /// `sum r x <= bound` (P1 cap).
    AtMost,
}

/// One binary variable `x_{b,k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variable {
    pub block: usize,
    pub user: usize,
    pub rate_kbps: f64,
}

/// Per-URLLC-user throughput row.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandConstraint {
    pub user: usize,
    pub sense: Sense,
    pub bound_kbps: f64,
    /// `(variable index, rate)` terms, in variable order.
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    /// Drop variables whose rate is zero (masked URLLC pairs and dominated eMBB pairs).
    pub prune_zero_rate: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { prune_zero_rate: true }
    }
}

/// A P0 or P1 instance. Immutable once built.
#[derive(Debug, Clone)]
pub struct IlpInstance {
    formulation: Formulation,
    slot_count: usize,
    block_cover: Vec<FixedBitSet>,
    classes: Vec<ServiceClass>,
    rates: RateMatrix,
    variables: Vec<Variable>,
    objective: Vec<f64>,
    demand_constraints: Vec<DemandConstraint>,
    overlap: Vec<Vec<usize>>,
}

pub fn build_p0(grid: &Grid, users: &[User], rates: &RateMatrix) -> Result<IlpInstance> {
    IlpInstance::build(Formulation::P0, grid, users, rates, BuildOptions::default())
}

pub fn build_p1(grid: &Grid, users: &[User], rates: &RateMatrix) -> Result<IlpInstance> {
    IlpInstance::build(Formulation::P1, grid, users, rates, BuildOptions::default())
}

impl IlpInstance {
    pub fn build(
        formulation: Formulation,
        grid: &Grid,
        users: &[User],
        rates: &RateMatrix,
        options: BuildOptions,
    ) -> Result<IlpInstance> {
        if rates.blocks() != grid.blocks().len() || rates.users() != users.len() {
            return Err(Error::DimensionMismatch(format!(
                "rate matrix is {}x{}, grid has {} blocks and there are {} users",
                rates.blocks(),
                rates.users(),
                grid.blocks().len(),
                users.len()
            )));
        }
        for (pos, user) in users.iter().enumerate() {
            if user.id != pos {
                return Err(Error::InvalidConfig(format!(
                    "user ids must be dense and ordered: position {pos} holds id {}",
                    user.id
                )));
            }
        }

        let counts_in_objective = |user: &User| match formulation {
            Formulation::P0 => user.is_embb(),
            Formulation::P1 => true,
        };

        let mut variables = Vec::new();
        let mut objective = Vec::new();
        for block in grid.blocks() {
            for user in users {
                let rate = rates.get(block.id, user.id);
                if options.prune_zero_rate && rate <= 0.0 {
                    continue;
                }
                variables.push(Variable {
                    block: block.id,
                    user: user.id,
                    rate_kbps: rate,
                });
                objective.push(if counts_in_objective(user) { rate } else { 0.0 });
            }
        }

        let mut demand_constraints = Vec::new();
        for user in users.iter().filter(|u| u.is_urllc()) {
            let (sense, bound_kbps) = match formulation {
                Formulation::P0 => (Sense::AtLeast, user.demand_q_kbps),
                Formulation::P1 => (
                    Sense::AtMost,
                    user.demand_cap_kbps().ok_or(Error::MissingSlack(user.id))?,
                ),
            };
            let terms = variables
                .iter()
                .enumerate()
                .filter(|(_, v)| v.user == user.id)
                .map(|(i, v)| (i, v.rate_kbps))
                .collect();
            demand_constraints.push(DemandConstraint {
                user: user.id,
                sense,
                bound_kbps,
                terms,
            });
        }

        let slot_count = grid.slot_count();
        let mut overlap = vec![Vec::new(); slot_count];
        for (i, v) in variables.iter().enumerate() {
            for slot in grid.blocks()[v.block].covered.ones() {
                overlap[slot].push(i);
            }
        }

        Ok(IlpInstance {
            formulation,
            slot_count,
            block_cover: grid.blocks().iter().map(|b| b.covered.clone()).collect(),
            classes: users.iter().map(|u| u.service_class).collect(),
            rates: rates.clone(),
            variables,
            objective,
            demand_constraints,
            overlap,
        })
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    /// Objective coefficient per variable, in variable order.
    pub fn objective_coeffs(&self) -> &[f64] {
        &self.objective
    }

    pub fn demand_constraints(&self) -> &[DemandConstraint] {
        &self.demand_constraints
    }

    /// Variable indices per mini-slot; each row carries `sum x <= 1`.
    pub fn overlap_constraints(&self) -> &[Vec<usize>] {
        &self.overlap
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn block_count(&self) -> usize {
        self.block_cover.len()
    }

    pub fn user_count(&self) -> usize {
        self.classes.len()
    }

    pub fn block_cover(&self, block: usize) -> &FixedBitSet {
        &self.block_cover[block]
    }

    pub fn service_class(&self, user: usize) -> ServiceClass {
        self.classes[user]
    }

    pub fn rates(&self) -> &RateMatrix {
        &self.rates
    }

    /// Whether `user`'s rate enters this formulation's objective.
    pub fn counts_in_objective(&self, user: usize) -> bool {
        match self.formulation {
            Formulation::P0 => self.classes[user] == ServiceClass::Embb,
            Formulation::P1 => true,
        }
    }

    /// Builds an [`Allocation`] from `(block, user)` pairs, computing served rates
    /// and the objective under this formulation.
    pub fn allocation_from_pairs(&self, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Allocation> {
        let mut assignments: Vec<Assignment> = pairs
            .into_iter()
            .map(|(block, user)| Assignment { block, user })
            .collect();
        for a in &assignments {
            self.check_ids(a)?;
        }
        assignments.sort();
        let mut served = vec![0.0; self.user_count()];
        let mut objective = 0.0;
        for a in &assignments {
            let r = self.rates.get(a.block, a.user);
            served[a.user] += r;
            if self.counts_in_objective(a.user) {
                objective += r;
            }
        }
        Ok(Allocation {
            assignments,
            objective_kbps: objective,
            per_user_served_kbps: served,
        })
    }

    fn check_ids(&self, a: &Assignment) -> Result<()> {
        if a.block >= self.block_count() {
            return Err(Error::UnknownBlock(a.block));
        }
        if a.user >= self.user_count() {
            return Err(Error::UnknownUser(a.user));
        }
        Ok(())
    }

    /// Writes the instance in CPLEX LP text format.
    pub fn write_lp<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        lp_format::write_lp(self, out)
    }
}

/// `x_{b,k} = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    pub block: usize,
    pub user: usize,
}

/// A set of assignments with its served rates. `assignments` is sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub assignments: Vec<Assignment>,
    pub objective_kbps: f64,
    /// Indexed by user id.
    pub per_user_served_kbps: Vec<f64>,
}

impl Allocation {
    pub fn empty(users: usize) -> Self {
        Allocation {
            assignments: Vec::new(),
            objective_kbps: 0.0,
            per_user_served_kbps: vec![0.0; users],
        }
    }

    /// Sum of served rates over users of `class`.
    pub fn served_by_class(&self, classes: &[ServiceClass], class: ServiceClass) -> f64 {
        self.per_user_served_kbps
            .iter()
            .zip(classes)
            .filter(|(_, c)| **c == class)
            .map(|(r, _)| r)
            .sum()
    }
}

/// A violated constraint and by how much.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// More than one assigned block covers `slot`.
    Overlap { slot: usize, blocks: Vec<usize> },
    /// P0: served below `q_k`; `margin = demand - served`.
    DemandShortfall {
        user: usize,
        served: f64,
        demand: f64,
        margin: f64,
    },
    /// P1: served above `q'_k`; `margin = served - cap`.
    CapExceeded {
        user: usize,
        served: f64,
        cap: f64,
        margin: f64,
    },
    /// The allocation's cached totals disagree with its assignments.
    Inconsistent { detail: String },
}

impl Violation {
    pub fn is_overlap(&self) -> bool {
        matches!(self, Violation::Overlap { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Overlap { slot, blocks } => write!(f, "slot {slot} covered by blocks {blocks:?}"),
            Violation::DemandShortfall {
                user,
                served,
                demand,
                margin,
            } => {
                write!(
                    f,
                    "user {user} served {served} kbps < demand {demand} (short by {margin})"
                )
            }
            Violation::CapExceeded {
                user,
                served,
                cap,
                margin,
            } => {
                write!(f, "user {user} served {served} kbps > cap {cap} (over by {margin})")
            }
            Violation::Inconsistent { detail } => f.write_str(detail),
        }
    }
}

/// Checks overlap and demand/cap rows within [`EPS_RATE`]. Empty means feasible.
pub fn verify_allocation(instance: &IlpInstance, allocation: &Allocation) -> Result<Vec<Violation>> {
    for a in &allocation.assignments {
        instance.check_ids(a)?;
    }
    let mut violations = Vec::new();

    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); instance.slot_count];
    for a in &allocation.assignments {
        for slot in instance.block_cover[a.block].ones() {
            holders[slot].push(a.block);
        }
    }
    for (slot, blocks) in holders.into_iter().enumerate() {
        if blocks.len() > 1 {
            violations.push(Violation::Overlap { slot, blocks });
        }
    }

    let recomputed = instance.allocation_from_pairs(allocation.assignments.iter().map(|a| (a.block, a.user)))?;
    if allocation.per_user_served_kbps.len() != instance.user_count() {
        violations.push(Violation::Inconsistent {
            detail: format!(
                "served vector has {} entries for {} users",
                allocation.per_user_served_kbps.len(),
                instance.user_count()
            ),
        });
    } else {
        for (user, (&got, &want)) in allocation
            .per_user_served_kbps
            .iter()
            .zip(&recomputed.per_user_served_kbps)
            .enumerate()
        {
            if (got - want).abs() > EPS_RATE * (1.0 + want.abs()) {
                violations.push(Violation::Inconsistent {
                    detail: format!("user {user} served {got} kbps but assignments sum to {want}"),
                });
            }
        }
    }
    let want = recomputed.objective_kbps;
    if (allocation.objective_kbps - want).abs() > EPS_RATE * (1.0 + want.abs()) {
        violations.push(Violation::Inconsistent {
            detail: format!(
                "objective {} kbps but assignments give {want}",
                allocation.objective_kbps
            ),
        });
    }

    for c in &instance.demand_constraints {
        let served = recomputed.per_user_served_kbps[c.user];
        match c.sense {
            Sense::AtLeast if served < c.bound_kbps - EPS_RATE => violations.push(Violation::DemandShortfall {
                user: c.user,
                served,
                demand: c.bound_kbps,
                margin: c.bound_kbps - served,
            }),
            Sense::AtMost if served > c.bound_kbps + EPS_RATE => violations.push(Violation::CapExceeded {
                user: c.user,
                served,
                cap: c.bound_kbps,
                margin: served - c.bound_kbps,
            }),
            _ => {}
        }
    }
    Ok(violations)
}
