//! Instance generators and exhaustive oracles shared by the integration tests.
#![allow(dead_code)]

use flexnr::grid::{Grid, GridConfig, ResourceBlock};
use flexnr::harness::Prepared;
use flexnr::ilp::{Allocation, Formulation};
use flexnr::rate::{RateMatrix, ServiceClass, User};
use rand::seq::SliceRandom;
use rand::Rng;

/// Rectangle intersection from block geometry alone.
pub fn rects_overlap(a: &ResourceBlock, b: &ResourceBlock) -> bool {
    a.f0 < b.f0 + b.freq_width && b.f0 < a.f0 + a.freq_width && a.t0 < b.t0 + b.time_len && b.t0 < a.t0 + a.time_len
}

/// Closed-form placement count.
pub fn expected_block_count(f: usize, t: usize, mu_max: u32, mus: &[u32]) -> usize {
    mus.iter()
        .map(|&mu| {
            let w = 1usize << mu;
            let l = 1usize << (mu_max - mu);
            (f + 1).saturating_sub(w) * (t + 1).saturating_sub(l)
        })
        .sum()
}

/// Small random grid with at most `max_blocks` placements.
pub fn random_grid<R: Rng>(rng: &mut R, max_blocks: usize) -> Grid {
    loop {
        let f = rng.gen_range(1..=4);
        let t = rng.gen_range(1..=4);
        let mu_max = rng.gen_range(0..=2u32);
        let mut mus: Vec<u32> = (0..=mu_max).filter(|_| rng.gen_bool(0.7)).collect();
        if mus.is_empty() {
            mus.push(rng.gen_range(0..=mu_max));
        }
        let count = expected_block_count(f, t, mu_max, &mus);
        if (1..=max_blocks).contains(&count) {
            return Grid::build(GridConfig::new(f, t, mu_max, &mus)).unwrap();
        }
    }
}

/// Random users with integer demands; URLLC users first or mixed.
pub fn random_users<R: Rng>(rng: &mut R, max_users: usize) -> Vec<User> {
    let n = rng.gen_range(1..=max_users);
    (0..n)
        .map(|id| {
            if rng.gen_bool(0.5) {
                User::urllc(id, 1.0, rng.gen_range(1..=30) as f64, 1.0, rng.gen_range(0..=15) as f64)
            } else {
                User::embb(id, 1.0)
            }
        })
        .collect()
}

/// Integer rates in `0..=20`, a third of them zero (masked or useless pairs).
pub fn random_rates<R: Rng>(rng: &mut R, blocks: usize, users: usize) -> RateMatrix {
    let entries = (0..blocks * users)
        .map(|_| {
            if rng.gen_bool(0.3) {
                0.0
            } else {
                rng.gen_range(1..=20) as f64
            }
        })
        .collect();
    RateMatrix::from_entries(blocks, users, entries).unwrap()
}

pub fn random_case<R: Rng>(rng: &mut R, max_blocks: usize, max_users: usize) -> Prepared {
    let grid = random_grid(rng, max_blocks);
    let mut users = random_users(rng, max_users);
    users.shuffle(rng);
    for (i, u) in users.iter_mut().enumerate() {
        u.id = i;
    }
    let rates = random_rates(rng, grid.blocks().len(), users.len());
    Prepared { grid, users, rates }
}

/// Exhaustive optimum: every block goes to nobody or to one user with a
/// positive rate. `None` when no assignment meets the constraints.
pub fn brute_force(case: &Prepared, formulation: Formulation) -> Option<f64> {
    let blocks = case.grid.blocks();
    let mut state = Brute {
        case,
        formulation,
        chosen: Vec::new(),
        served: vec![0.0; case.users.len()],
        best: None,
    };
    state.go(blocks, 0);
    state.best
}

struct Brute<'a> {
    case: &'a Prepared,
    formulation: Formulation,
    chosen: Vec<usize>,
    served: Vec<f64>,
    best: Option<f64>,
}

impl Brute<'_> {
    fn go(&mut self, blocks: &[ResourceBlock], b: usize) {
        if b == blocks.len() {
            self.leaf();
            return;
        }
        self.go(blocks, b + 1);
        if self.chosen.iter().any(|&c| rects_overlap(&blocks[c], &blocks[b])) {
            return;
        }
        for k in 0..self.case.users.len() {
            let r = self.case.rates.get(b, k);
            if r <= 0.0 {
                continue;
            }
            self.chosen.push(b);
            self.served[k] += r;
            self.go(blocks, b + 1);
            self.served[k] -= r;
            self.chosen.pop();
        }
    }

    fn leaf(&mut self) {
        let mut obj = 0.0;
        for (k, u) in self.case.users.iter().enumerate() {
            let s = self.served[k];
            match (self.formulation, u.service_class) {
                (Formulation::P0, ServiceClass::Urllc) => {
                    if s < u.demand_q_kbps {
                        return;
                    }
                }
                (Formulation::P0, ServiceClass::Embb) => obj += s,
                (Formulation::P1, ServiceClass::Urllc) => {
                    if s > u.demand_q_kbps + u.slack_u_kbps.unwrap_or(0.0) {
                        return;
                    }
                    obj += s;
                }
                (Formulation::P1, ServiceClass::Embb) => obj += s,
            }
        }
        if self.best.is_none_or(|b| obj > b) {
            self.best = Some(obj);
        }
    }
}

/// Largest rate user `k` alone can collect from pairwise disjoint blocks.
pub fn max_attainable(case: &Prepared, k: usize) -> f64 {
    fn go(blocks: &[ResourceBlock], rates: &[f64], b: usize, chosen: &mut Vec<usize>, acc: f64, best: &mut f64) {
        if b == blocks.len() {
            *best = best.max(acc);
            return;
        }
        go(blocks, rates, b + 1, chosen, acc, best);
        if rates[b] > 0.0 && !chosen.iter().any(|&c| rects_overlap(&blocks[c], &blocks[b])) {
            chosen.push(b);
            go(blocks, rates, b + 1, chosen, acc + rates[b], best);
            chosen.pop();
        }
    }
    let rates: Vec<f64> = case.rates.column(k).collect();
    let mut best = 0.0;
    go(case.grid.blocks(), &rates, 0, &mut Vec::new(), 0.0, &mut best);
    best
}

/// Independent overlap check of an allocation, by geometry.
pub fn has_overlap(grid: &Grid, alloc: &Allocation) -> bool {
    let blocks = grid.blocks();
    let a = &alloc.assignments;
    (0..a.len()).any(|i| (i + 1..a.len()).any(|j| rects_overlap(&blocks[a[i].block], &blocks[a[j].block])))
}
