//! Pieces of the node upper bound used by the branch-and-bound search.
//!
//! At a node the remaining candidates are relaxed to "any `K` blocks", where
//! `K` is the free usable mini-slot count divided by the smallest candidate
//! area. Each URLLC user is a group whose value depends only on how many
//! blocks it receives; unconstrained users share one group whose value is
//! the top-`n` sum of per-block best coefficients. Groups are merged with a
//! small knapsack over block counts. Every step only drops constraints, so
//! the result never underestimates the subtree optimum.

use crate::rate::EPS_RATE;

/// Enumeration states allowed before [`best_sums_under_cap`] falls back to the
/// looser `min(cap, top-n sum)` bound.
pub(super) const SUBSET_BUDGET: usize = 20_000;

/// `out[n]` = sum of the `n` largest values. `sorted_desc` must be non-increasing.
pub(super) fn prefix_sums(sorted_desc: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.push(0.0);
    let mut acc = 0.0;
    for &v in sorted_desc {
        acc += v;
        out.push(acc);
    }
}

/// Fewest values whose sum reaches `need` (within [`EPS_RATE`]), or `None`.
pub(super) fn min_count_reaching(sorted_desc: &[f64], need: f64) -> Option<usize> {
    if need <= EPS_RATE {
        return Some(0);
    }
    let mut acc = 0.0;
    for (i, &v) in sorted_desc.iter().enumerate() {
        acc += v;
        if acc >= need - EPS_RATE {
            return Some(i + 1);
        }
    }
    None
}

/// `out[n]` for `n = 0..=min(len, max_count)`: the largest sum of at most `n`
/// values that stays within `cap`. Non-decreasing in `n`.
///
/// Exact when the multiset has few distinct values (the usual case: rates
/// depend on numerology only); otherwise `min(cap, top-n sum)`.
pub(super) fn best_sums_under_cap(sorted_desc: &[f64], cap: f64, max_count: usize, out: &mut Vec<f64>) {
    let len = sorted_desc.len().min(max_count);
    out.clear();
    out.resize(len + 1, 0.0);
    if len == 0 {
        return;
    }

    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for &v in sorted_desc {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }

    let mut states = 0usize;
    let exact = enumerate_multiplicities(&distinct, 0, 0, 0.0, cap, len, out, &mut states);
    if !exact {
        let mut acc = 0.0;
        out[0] = 0.0;
        for n in 1..=len {
            acc += sorted_desc[n - 1];
            out[n] = acc.min(cap.max(0.0));
        }
    }
    for n in 1..=len {
        if out[n] < out[n - 1] {
            out[n] = out[n - 1];
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate_multiplicities(
    distinct: &[(f64, usize)],
    at: usize,
    count: usize,
    sum: f64,
    cap: f64,
    max_count: usize,
    out: &mut [f64],
    states: &mut usize,
) -> bool {
    *states += 1;
    if *states > SUBSET_BUDGET {
        return false;
    }
    if sum > out[count] {
        out[count] = sum;
    }
    if at == distinct.len() {
        return true;
    }
    let (value, available) = distinct[at];
    for m in 0..=available.min(max_count - count) {
        let next = sum + m as f64 * value;
        if next > cap + EPS_RATE {
            break;
        }
        if !enumerate_multiplicities(distinct, at + 1, count + m, next, cap, max_count, out, states) {
            return false;
        }
    }
    true
}

/// Merges a group with values `group[n]` (for `n` blocks) into the running
/// table `acc[c]` (best value using at most `c` blocks).
pub(super) fn merge_group(acc: &[f64], group: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for c in 0..acc.len() {
        let mut best = acc[c];
        for n in 1..group.len().min(c + 1) {
            let v = group[n] + acc[c - n];
            if v > best {
                best = v;
            }
        }
        out.push(best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// All subsets, brute force.
    fn brute_best(values: &[f64], cap: f64, n: usize) -> f64 {
        let mut best = 0.0f64;
        for mask in 0u32..(1 << values.len()) {
            if mask.count_ones() as usize > n {
                continue;
            }
            let s: f64 = (0..values.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| values[i])
                .sum();
            if s <= cap + EPS_RATE {
                best = best.max(s);
            }
        }
        best
    }

    #[test]
    fn prefix_and_min_count() {
        let v = [5.0, 3.0, 1.0];
        let mut p = Vec::new();
        prefix_sums(&v, &mut p);
        assert_eq!(p, vec![0.0, 5.0, 8.0, 9.0]);
        assert_eq!(min_count_reaching(&v, 0.0), Some(0));
        assert_eq!(min_count_reaching(&v, 6.0), Some(2));
        assert_eq!(min_count_reaching(&v, 9.0), Some(3));
        assert_eq!(min_count_reaching(&v, 9.5), None);
    }

    #[test]
    fn cap_granularity_is_respected() {
        // Three 90 kbps blocks under a 200 kbps cap: at most 180.
        let mut out = Vec::new();
        best_sums_under_cap(&[90.0, 90.0, 90.0], 200.0, 10, &mut out);
        assert_eq!(out, vec![0.0, 90.0, 180.0, 180.0]);
    }

    #[test]
    fn merge_prefers_valuable_groups() {
        // acc: eMBB worth 10 per block; group: URLLC worth 25 for the first block only.
        let acc = [0.0, 10.0, 20.0, 30.0];
        let group = [0.0, 25.0, 25.0];
        let mut out = Vec::new();
        merge_group(&acc, &group, &mut out);
        assert_eq!(out, vec![0.0, 25.0, 35.0, 45.0]);
    }

    proptest! {
        #[test]
        fn best_sums_match_brute_force(
            raw in prop::collection::vec(1u32..6, 0..9),
            cap in 0u32..30,
            max_count in 0usize..10,
        ) {
            let mut values: Vec<f64> = raw.iter().map(|&v| v as f64 * 10.0).collect();
            values.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let cap = cap as f64 * 7.0;
            let mut out = Vec::new();
            best_sums_under_cap(&values, cap, max_count, &mut out);
            prop_assert_eq!(out.len(), values.len().min(max_count) + 1);
            for (n, &got) in out.iter().enumerate() {
                prop_assert_eq!(got, brute_best(&values, cap, n));
            }
        }

        #[test]
        fn fallback_never_underestimates(
            raw in prop::collection::vec(1u32..1000, 0..12),
            cap in 0u32..4000,
        ) {
            let mut values: Vec<f64> = raw.iter().map(|&v| v as f64).collect();
            values.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let cap = cap as f64;
            let mut out = Vec::new();
            best_sums_under_cap(&values, cap, values.len(), &mut out);
            for (n, &got) in out.iter().enumerate() {
                prop_assert!(got >= brute_best(&values, cap, n));
            }
        }
    }
}
