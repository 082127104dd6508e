//! Two-step best-effort scheduler.
//!
//! Step one places URLLC demands, tightest deadline first. Each user keeps
//! taking the free, unmasked block with the best
//! `rate / (1 + conflict_cost)` score until its demand is met or nothing is
//! left, where `conflict_cost` prices the eMBB throughput the placement
//! would destroy: the sum, over still-free blocks that overlap it, of the best
//! eMBB rate each could have carried. Users that cannot be fully served keep
//! what they got.
//!
//! Step two hands every remaining non-overlapping block to eMBB users in
//! decreasing rate order.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::ilp::{Allocation, Assignment};
use crate::rate::{RateMatrix, User, EPS_RATE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementCandidate {
    pub block: usize,
    pub user: usize,
    pub rate_kbps: f64,
    pub conflict_cost: f64,
    pub score: f64,
}

/// How much of a URLLC demand the heuristic met.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "coverage", content = "served_kbps")]
pub enum Coverage {
    Fully,
    Partially(f64),
    Dropped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicResult {
    pub allocation: Allocation,
    pub urllc_covered: BTreeMap<usize, Coverage>,
    pub embb_sum_kbps: f64,
}

fn check_dims(grid: &Grid, users: &[User], rates: &RateMatrix) -> Result<()> {
    if rates.blocks() != grid.blocks().len() || rates.users() != users.len() {
        return Err(Error::DimensionMismatch(format!(
            "rate matrix is {}x{}, grid has {} blocks and there are {} users",
            rates.blocks(),
            rates.users(),
            grid.blocks().len(),
            users.len()
        )));
    }
    Ok(())
}

/// Best eMBB rate per block (0 when there is no eMBB user).
fn embb_block_value(users: &[User], rates: &RateMatrix) -> Vec<f64> {
    (0..rates.blocks())
        .map(|b| {
            users
                .iter()
                .filter(|u| u.is_embb())
                .map(|u| rates.get(b, u.id))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Builds an allocation whose objective is the eMBB sum rate.
fn allocation_from(users: &[User], rates: &RateMatrix, mut assignments: Vec<Assignment>) -> Allocation {
    assignments.sort();
    let mut served = vec![0.0; users.len()];
    for a in &assignments {
        served[a.user] += rates.get(a.block, a.user);
    }
    let objective = users.iter().filter(|u| u.is_embb()).map(|u| served[u.id]).sum();
    Allocation {
        assignments,
        objective_kbps: objective,
        per_user_served_kbps: served,
    }
}

fn occupancy(grid: &Grid, assignments: &[Assignment]) -> Result<FixedBitSet> {
    let mut occupied = FixedBitSet::with_capacity(grid.slot_count());
    for a in assignments {
        let cover = &grid.block(a.block)?.covered;
        if !cover.is_disjoint(&occupied) {
            return Err(Error::InvalidConfig(format!(
                "partial allocation overlaps at block {}",
                a.block
            )));
        }
        occupied.union_with(cover);
    }
    Ok(occupied)
}

/// Scored placements for `user` given the slots already `occupied`, in block order.
pub fn placement_candidates(
    grid: &Grid,
    users: &[User],
    rates: &RateMatrix,
    user: usize,
    occupied: &FixedBitSet,
) -> Result<Vec<PlacementCandidate>> {
    check_dims(grid, users, rates)?;
    if user >= users.len() {
        return Err(Error::UnknownUser(user));
    }
    let embb_value = embb_block_value(users, rates);
    Ok(candidates_for(grid, rates, &embb_value, user, occupied))
}

fn candidates_for(
    grid: &Grid,
    rates: &RateMatrix,
    embb_value: &[f64],
    user: usize,
    occupied: &FixedBitSet,
) -> Vec<PlacementCandidate> {
    let blocks = grid.blocks();
    blocks
        .iter()
        .filter(|b| rates.get(b.id, user) > 0.0 && b.covered.is_disjoint(occupied))
        .map(|b| {
            let rate = rates.get(b.id, user);
            let conflict_cost: f64 = grid
                .conflict_bits(b.id)
                .ones()
                .filter(|&c| blocks[c].covered.is_disjoint(occupied))
                .map(|c| embb_value[c])
                .sum();
            PlacementCandidate {
                block: b.id,
                user,
                rate_kbps: rate,
                conflict_cost,
                score: rate / (1.0 + conflict_cost),
            }
        })
        .collect()
}

/// Step one: URLLC placement in increasing `(tau, id)` order.
pub fn schedule_urllc_phase(grid: &Grid, users: &[User], rates: &RateMatrix) -> Result<Allocation> {
    check_dims(grid, users, rates)?;
    let embb_value = embb_block_value(users, rates);
    let mut order: Vec<&User> = users.iter().filter(|u| u.is_urllc()).collect();
    order.sort_by(|a, b| {
        let ta = a.latency_tau_ms.unwrap_or(f64::INFINITY);
        let tb = b.latency_tau_ms.unwrap_or(f64::INFINITY);
        ta.total_cmp(&tb).then(a.id.cmp(&b.id))
    });

    let mut occupied = FixedBitSet::with_capacity(grid.slot_count());
    let mut assignments = Vec::new();
    for user in order {
        let mut served = 0.0;
        while served < user.demand_q_kbps - EPS_RATE {
            let pick = candidates_for(grid, rates, &embb_value, user.id, &occupied)
                .into_iter()
                .fold(None::<PlacementCandidate>, |best, c| match best {
                    Some(b) if b.score >= c.score => Some(b),
                    _ => Some(c),
                });
            let Some(pick) = pick else { break };
            occupied.union_with(&grid.blocks()[pick.block].covered);
            served += pick.rate_kbps;
            assignments.push(Assignment {
                block: pick.block,
                user: user.id,
            });
        }
    }
    Ok(allocation_from(users, rates, assignments))
}

/// Step two: fill every remaining free block with the best eMBB user.
pub fn schedule_embb_phase(
    grid: &Grid,
    users: &[User],
    rates: &RateMatrix,
    partial: &Allocation,
) -> Result<Allocation> {
    check_dims(grid, users, rates)?;
    let mut occupied = occupancy(grid, &partial.assignments)?;

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for block in grid.blocks() {
        for user in users.iter().filter(|u| u.is_embb()) {
            let r = rates.get(block.id, user.id);
            if r > 0.0 {
                pairs.push((r, block.id, user.id));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut assignments = partial.assignments.clone();
    for (_, block, user) in pairs {
        let cover = &grid.blocks()[block].covered;
        if cover.is_disjoint(&occupied) {
            occupied.union_with(cover);
            assignments.push(Assignment { block, user });
        }
    }
    Ok(allocation_from(users, rates, assignments))
}

/// Both steps, with per-user URLLC coverage.
pub fn run_heuristic(grid: &Grid, users: &[User], rates: &RateMatrix) -> Result<HeuristicResult> {
    let partial = schedule_urllc_phase(grid, users, rates)?;
    let allocation = schedule_embb_phase(grid, users, rates, &partial)?;
    let urllc_covered = users
        .iter()
        .filter(|u| u.is_urllc())
        .map(|u| {
            let served = allocation.per_user_served_kbps[u.id];
            let cov = if served >= u.demand_q_kbps - EPS_RATE {
                Coverage::Fully
            } else if served > 0.0 {
                Coverage::Partially(served)
            } else {
                Coverage::Dropped
            };
            (u.id, cov)
        })
        .collect();
    Ok(HeuristicResult {
        embb_sum_kbps: allocation.objective_kbps,
        allocation,
        urllc_covered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;

    fn blocks_of(a: &Allocation) -> Vec<(usize, usize)> {
        a.assignments.iter().map(|a| (a.block, a.user)).collect()
    }

    #[test]
    fn single_candidate_covers_user() {
        let g = Grid::build(GridConfig::new(1, 1, 0, &[0])).unwrap();
        let users = [User::urllc(0, 1.0, 50.0, 1.0, 0.0)];
        let rates = RateMatrix::from_entries(1, 1, vec![80.0]).unwrap();
        let res = run_heuristic(&g, &users, &rates).unwrap();
        assert_eq!(blocks_of(&res.allocation), vec![(0, 0)]);
        assert_eq!(res.urllc_covered[&0], Coverage::Fully);
    }

    #[test]
    fn fully_masked_user_is_dropped() {
        let g = Grid::build(GridConfig::new(2, 2, 1, &[0, 1])).unwrap();
        let users = [User::urllc(0, 1.0, 50.0, 0.1, 0.0)];
        let rates = RateMatrix::from_entries(4, 1, vec![0.0; 4]).unwrap();
        let phase1 = schedule_urllc_phase(&g, &users, &rates).unwrap();
        assert!(phase1.assignments.is_empty());
        let res = run_heuristic(&g, &users, &rates).unwrap();
        assert_eq!(res.urllc_covered[&0], Coverage::Dropped);
    }

    #[test]
    fn tighter_deadline_wins_contested_block() {
        let g = Grid::build(GridConfig::new(1, 1, 0, &[0])).unwrap();
        // User 0 has the looser deadline but the lower id.
        let users = [User::urllc(0, 1.0, 10.0, 2.0, 0.0), User::urllc(1, 1.0, 10.0, 1.0, 0.0)];
        let rates = RateMatrix::from_entries(1, 2, vec![20.0, 20.0]).unwrap();
        let res = run_heuristic(&g, &users, &rates).unwrap();
        assert_eq!(blocks_of(&res.allocation), vec![(0, 1)]);
        assert_eq!(res.urllc_covered[&0], Coverage::Dropped);
        assert_eq!(res.urllc_covered[&1], Coverage::Fully);
    }

    #[test]
    fn embb_fill_takes_disjoint_blocks() {
        let g = Grid::build(GridConfig::new(1, 2, 0, &[0])).unwrap();
        let users = [User::embb(0, 1.0)];
        let rates = RateMatrix::from_entries(2, 1, vec![10.0, 20.0]).unwrap();
        let res = run_heuristic(&g, &users, &rates).unwrap();
        assert_eq!(res.embb_sum_kbps, 30.0);
    }

    #[test]
    fn embb_fill_respects_full_urllc_block() {
        // 2x2 grid with mu_max=2 and mu=1: a single 2x2 block covers everything.
        let g = Grid::build(GridConfig::new(2, 2, 2, &[1])).unwrap();
        let users = [User::embb(0, 1.0), User::urllc(1, 1.0, 5.0, 1.0, 0.0)];
        let rates = RateMatrix::from_entries(1, 2, vec![30.0, 10.0]).unwrap();
        let partial = schedule_urllc_phase(&g, &users, &rates).unwrap();
        assert_eq!(blocks_of(&partial), vec![(0, 1)]);
        let full = schedule_embb_phase(&g, &users, &rates, &partial).unwrap();
        assert_eq!(blocks_of(&full), vec![(0, 1)]);
        assert_eq!(full.objective_kbps, 0.0);
    }

    #[test]
    fn embb_fill_picks_better_user() {
        let g = Grid::build(GridConfig::new(1, 1, 0, &[0])).unwrap();
        let users = [User::embb(0, 1.0), User::embb(1, 1.0)];
        let rates = RateMatrix::from_entries(1, 2, vec![5.0, 7.0]).unwrap();
        let res = run_heuristic(&g, &users, &rates).unwrap();
        assert_eq!(blocks_of(&res.allocation), vec![(0, 1)]);
        assert_eq!(res.embb_sum_kbps, 7.0);
    }

    #[test]
    fn conflict_cost_steers_placement() {
        // 1x3 strip of 1x2 blocks: b0 = slots {0,1}, b1 = slots {1,2}, which conflict.
        // The URLLC user should take the block whose neighbourhood is cheaper for eMBB.
        let g = Grid::build(GridConfig::new(1, 3, 1, &[0])).unwrap();
        let users = [User::embb(0, 1.0), User::urllc(1, 1.0, 5.0, 10.0, 0.0)];
        // eMBB values: b0=50, b1=5. URLLC rates equal.
        let rates = RateMatrix::from_entries(2, 2, vec![50.0, 10.0, 5.0, 10.0]).unwrap();
        let occupied = FixedBitSet::with_capacity(g.slot_count());
        let cands = placement_candidates(&g, &users, &rates, 1, &occupied).unwrap();
        assert_eq!(cands[0].conflict_cost, 5.0);
        assert_eq!(cands[1].conflict_cost, 50.0);
        let partial = schedule_urllc_phase(&g, &users, &rates).unwrap();
        assert_eq!(blocks_of(&partial), vec![(0, 1)]);
    }

    #[test]
    fn empty_users_give_empty_allocation() {
        let g = Grid::build(GridConfig::new(2, 2, 1, &[0, 1])).unwrap();
        let rates = RateMatrix::from_entries(4, 0, vec![]).unwrap();
        let res = run_heuristic(&g, &[], &rates).unwrap();
        assert!(res.allocation.assignments.is_empty());
        assert!(res.urllc_covered.is_empty());
        assert_eq!(res.embb_sum_kbps, 0.0);
    }

    #[test]
    fn overlapping_partial_is_rejected() {
        let g = Grid::build(GridConfig::new(2, 2, 1, &[0, 1])).unwrap();
        let users = [User::embb(0, 1.0)];
        let rates = RateMatrix::from_entries(4, 1, vec![1.0; 4]).unwrap();
        let partial = allocation_from(
            &users,
            &rates,
            vec![Assignment { block: 0, user: 0 }, Assignment { block: 2, user: 0 }],
        );
        assert!(schedule_embb_phase(&g, &users, &rates, &partial).is_err());
    }
}
