//! Acceptance criteria 1-7. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers to run a subset.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use flexnr::grid::{Grid, GridConfig};
use flexnr::harness::{
    csv_string, emit_csv, emit_plot_data, presets, run_method, sweep, Method, MetricStatus, Metrics, Prepared,
    RunOptions,
};
use flexnr::ilp::{build_p0, build_p1, solve_exact, verify_allocation, Formulation, SolveStatus, DEFAULT_NODE_LIMIT};
use flexnr::rate::{build_rate_matrix, RateModelParams, User, EPS_RATE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force, has_overlap, max_attainable, random_case, random_grid};

type Outcome = Result<String, String>;

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 P1 totality", p1_totality),
        ("3 overlap invariant", overlap_invariant),
        ("4 dominance", dominance),
        ("5 trend reproduction", trend_reproduction),
        ("6 constant area", constant_area),
        ("7 determinism", determinism),
    ];
    // Optional filter: criterion numbers as arguments, e.g. `-- 1 4`.
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| name.split(' ').next() == Some(w.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail}; {secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail}; {secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

const ORACLE_CASES: usize = 250;

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let mut feasible_p0 = 0;
    for case_no in 0..ORACLE_CASES {
        let case = random_case(&mut rng, 12, 3);
        for formulation in [Formulation::P0, Formulation::P1] {
            let inst = match formulation {
                Formulation::P0 => build_p0(&case.grid, &case.users, &case.rates),
                Formulation::P1 => build_p1(&case.grid, &case.users, &case.rates),
            }
            .map_err(|e| e.to_string())?;
            let result = solve_exact(&inst, DEFAULT_NODE_LIMIT).map_err(|e| e.to_string())?;
            let oracle = brute_force(&case, formulation);
            let got = match result.status {
                SolveStatus::Optimal => result.allocation.as_ref().map(|a| a.objective_kbps),
                SolveStatus::Infeasible => None,
                SolveStatus::NodeLimit => return Err(format!("case {case_no} {formulation}: node limit")),
            };
            if got != oracle {
                return Err(format!(
                    "case {case_no} {formulation}: solver {got:?}, oracle {oracle:?}"
                ));
            }
            if let Some(alloc) = &result.allocation {
                let violations = verify_allocation(&inst, alloc).map_err(|e| e.to_string())?;
                if !violations.is_empty() {
                    return Err(format!("case {case_no} {formulation}: {violations:?}"));
                }
            }
            if formulation == Formulation::P0 && got.is_some() {
                feasible_p0 += 1;
            }
        }
    }
    Ok(format!(
        "{ORACLE_CASES} instances x {{P0, P1}} match exhaustive search exactly, {feasible_p0} P0-feasible"
    ))
}

const INFEASIBLE_CASES: usize = 120;

fn p1_totality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);
    let mut built = 0;
    let options = RunOptions {
        node_limit: DEFAULT_NODE_LIMIT,
        record_wall_time: false,
    };
    while built < INFEASIBLE_CASES {
        let mut case = random_case(&mut rng, 12, 3);
        let Some(k) = case.users.iter().position(User::is_urllc) else {
            continue;
        };
        // One more than anything the user could collect without conflicts.
        case.users[k].demand_q_kbps = max_attainable(&case, k) + 1.0;
        if brute_force(&case, Formulation::P0).is_some() {
            return Err(format!("generator produced a feasible case {built}"));
        }
        built += 1;

        let p0 = run_method(&case, Method::P0, &options).map_err(|e| e.to_string())?;
        if p0.metrics.status != MetricStatus::Infeasible {
            return Err(format!("case {built}: P0 returned {:?}", p0.metrics.status));
        }
        let p1 = run_method(&case, Method::P1, &options).map_err(|e| e.to_string())?;
        if p1.metrics.status != MetricStatus::Optimal {
            return Err(format!("case {built}: P1 returned {:?}", p1.metrics.status));
        }
        let heur = run_method(&case, Method::Heuristic, &options).map_err(|e| e.to_string())?;
        let alloc = heur.allocation.ok_or("heuristic returned no allocation")?;
        if heur.metrics.status != MetricStatus::BestEffort || has_overlap(&case.grid, &alloc) {
            return Err(format!("case {built}: heuristic allocation rejected"));
        }
    }
    Ok(format!(
        "{INFEASIBLE_CASES} P0-infeasible instances: P1 Optimal and heuristic BestEffort on all"
    ))
}

/// A fuzz instance: synthetic integer rates or the physical rate model.
fn fuzz_case(rng: &mut ChaCha8Rng) -> Prepared {
    if rng.gen_bool(0.5) {
        return random_case(rng, 20, 4);
    }
    let grid = random_grid(rng, 20);
    let n = rng.gen_range(1..=4);
    let users: Vec<User> = (0..n)
        .map(|id| {
            let se = rng.gen_range(0.5..6.0);
            if rng.gen_bool(0.5) {
                let tau = [0.25, 0.5, 1.0, 1.5, 2.0][rng.gen_range(0..5)];
                User::urllc(id, se, rng.gen_range(10.0..400.0), tau, rng.gen_range(0.0..200.0))
            } else {
                User::embb(id, se)
            }
        })
        .collect();
    let rates = build_rate_matrix(&grid, &users, &RateModelParams::default()).expect("valid fuzz instance");
    Prepared { grid, users, rates }
}

const FUZZ_CASES: usize = 10_000;

struct FuzzStats {
    runs: usize,
    p0_optimal: usize,
    dominance_failures: Vec<String>,
    /// Dominance failures where the heuristic met every URLLC demand (impossible if both are correct).
    dominance_with_full_coverage: usize,
    coverage_failures: Vec<String>,
}

fn fuzz() -> Result<FuzzStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let options = RunOptions {
        node_limit: 200_000,
        record_wall_time: false,
    };
    let mut stats = FuzzStats {
        runs: 0,
        p0_optimal: 0,
        dominance_failures: Vec::new(),
        dominance_with_full_coverage: 0,
        coverage_failures: Vec::new(),
    };
    for case_no in 0..FUZZ_CASES {
        let case = fuzz_case(&mut rng);
        let mut p0_embb = None;
        for method in Method::ALL {
            // run_method rejects any allocation with violations; the geometric check is independent.
            let outcome = run_method(&case, method, &options).map_err(|e| format!("case {case_no} {method}: {e}"))?;
            stats.runs += 1;
            if let Some(alloc) = &outcome.allocation {
                if has_overlap(&case.grid, alloc) {
                    return Err(format!("case {case_no} {method}: overlapping blocks"));
                }
            }
            let m = outcome.metrics;
            match method {
                Method::P0 if m.status == MetricStatus::Optimal => {
                    stats.p0_optimal += 1;
                    if m.urllc_coverage != Some(1.0) {
                        stats
                            .coverage_failures
                            .push(format!("case {case_no}: coverage {:?}", m.urllc_coverage));
                    }
                    p0_embb = m.embb_sum_kbps;
                }
                Method::Heuristic => {
                    if let (Some(best), Some(h)) = (p0_embb, m.embb_sum_kbps) {
                        if h > best + EPS_RATE {
                            stats.dominance_failures.push(format!(
                                "case {case_no}: heuristic {h} > P0 {best} at heuristic coverage {:.4}",
                                m.urllc_coverage.unwrap_or(0.0)
                            ));
                            if m.urllc_coverage == Some(1.0) {
                                stats.dominance_with_full_coverage += 1;
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    Ok(stats)
}

thread_local! {
    static FUZZ: std::cell::OnceCell<Result<FuzzStats, String>> = const { std::cell::OnceCell::new() };
}

fn with_fuzz<T>(f: impl FnOnce(&FuzzStats) -> Result<T, String>) -> Result<T, String> {
    FUZZ.with(|cell| match cell.get_or_init(fuzz) {
        Ok(stats) => f(stats),
        Err(e) => Err(e.clone()),
    })
}

fn overlap_invariant() -> Outcome {
    with_fuzz(|s| {
        Ok(format!(
            "{} instances, {} method runs, zero overlap violations",
            FUZZ_CASES, s.runs
        ))
    })
}

fn dominance() -> Outcome {
    let fuzz_part = with_fuzz(|s| {
        if let Some(first) = s.coverage_failures.first() {
            return Err(format!(
                "P0 coverage below 1.0 ({} cases, first {first})",
                s.coverage_failures.len()
            ));
        }
        if let Some(first) = s.dominance_failures.first() {
            return Err(format!(
                "{} of {} P0-optimal fuzz instances, {} of them with full heuristic coverage, first {first}",
                s.dominance_failures.len(),
                s.p0_optimal,
                s.dominance_with_full_coverage
            ));
        }
        Ok(s.p0_optimal)
    })?;
    let rows = default_sweep_rows()?;
    let mut sweep_checked = 0;
    for cell in rows.chunks(3) {
        let [p0, _, heur] = cell else {
            return Err("sweep rows not grouped by cell".into());
        };
        if p0.status != MetricStatus::Optimal {
            continue;
        }
        sweep_checked += 1;
        if p0.urllc_coverage != Some(1.0) {
            return Err(format!("sweep P0 coverage {:?}", p0.urllc_coverage));
        }
        if heur.embb_sum_kbps.unwrap_or(f64::INFINITY) > p0.embb_sum_kbps.unwrap_or(f64::NEG_INFINITY) + EPS_RATE {
            return Err(format!(
                "sweep cell ({:?}, {:?}) violates dominance",
                p0.demand_kbps, p0.latency_ms
            ));
        }
    }
    Ok(format!(
        "{fuzz_part} P0-optimal fuzz instances and {sweep_checked} sweep cells, coverage exactly 1.0"
    ))
}

thread_local! {
    static SWEEP: std::cell::OnceCell<Result<Vec<Metrics>, String>> = const { std::cell::OnceCell::new() };
}

fn default_sweep_rows() -> Result<Vec<Metrics>, String> {
    SWEEP.with(|cell| {
        cell.get_or_init(|| sweep(&presets::default_sweep(), None).map_err(|e| e.to_string()))
            .clone()
    })
}

fn embb(rows: &[Metrics], method: Method, demand: f64, latency: f64) -> Result<f64, String> {
    rows.iter()
        .find(|r| r.method == method && r.demand_kbps == Some(demand) && r.latency_ms == Some(latency))
        .and_then(|r| r.embb_sum_kbps)
        .ok_or_else(|| format!("{method} has no throughput at ({demand}, {latency})"))
}

fn trend_reproduction() -> Outcome {
    let spec = presets::default_sweep();
    let rows = default_sweep_rows()?;
    if let Some(r) = rows.iter().find(|r| r.status == MetricStatus::NodeLimit) {
        return Err(format!(
            "{} hit the node limit at ({:?}, {:?})",
            r.method, r.demand_kbps, r.latency_ms
        ));
    }
    let (demands, latencies) = (&spec.demand_values_kbps, &spec.latency_values_ms);
    let mut pairs = 0;
    for method in [Method::P1, Method::Heuristic] {
        for &d in demands {
            for w in latencies.windows(2) {
                let (a, b) = (embb(&rows, method, d, w[0])?, embb(&rows, method, d, w[1])?);
                pairs += 1;
                if b < a {
                    return Err(format!("{method} at {d} kbps: {a} at {} ms > {b} at {} ms", w[0], w[1]));
                }
            }
        }
        for &l in latencies {
            for w in demands.windows(2) {
                let (a, b) = (embb(&rows, method, w[0], l)?, embb(&rows, method, w[1], l)?);
                pairs += 1;
                if b > a {
                    return Err(format!(
                        "{method} at {l} ms: {a} at {} kbps < {b} at {} kbps",
                        w[0], w[1]
                    ));
                }
            }
        }
    }
    Ok(format!(
        "{}x{} sweep, {pairs} ordered pairs hold for p1 and heuristic",
        demands.len(),
        latencies.len()
    ))
}

fn constant_area() -> Outcome {
    let mut grids = vec![
        presets::default_scenario().grid,
        presets::stress_scenario().grid,
        presets::default_sweep().base.grid,
    ];
    for f in 1..=8 {
        for t in 1..=8 {
            for mu_max in 0..=3u32 {
                let mus: Vec<u32> = (0..=mu_max).collect();
                grids.push(GridConfig::new(f, t, mu_max, &mus));
            }
        }
    }
    let mut blocks = 0;
    for cfg in &grids {
        let grid = Grid::build(cfg.clone()).map_err(|e| e.to_string())?;
        let area = 1usize << grid.mu_max();
        for b in grid.blocks() {
            blocks += 1;
            if b.covered.count_ones(..) != area || b.freq_width * b.time_len != area {
                return Err(format!(
                    "block {} of a {}x{} grid covers {}",
                    b.id,
                    cfg.freq_units,
                    cfg.time_units,
                    b.covered.count_ones(..)
                ));
            }
        }
    }
    Ok(format!(
        "{} grids (3 presets), {blocks} blocks each cover 2^mu_max mini-slots",
        grids.len()
    ))
}

fn determinism() -> Outcome {
    let spec = presets::default_sweep();
    let first = default_sweep_rows()?;
    let second = sweep(&spec, None).map_err(|e| e.to_string())?;
    let dirs = [
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    ];
    let mut files = 0;
    for (rows, dir) in [(&first, &dirs[0]), (&second, &dirs[1])] {
        emit_csv(rows, &dir.path().join("results.csv")).map_err(|e| e.to_string())?;
        emit_plot_data(rows, dir.path()).map_err(|e| e.to_string())?;
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    names.sort();
    for name in &names {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name:?} differs between runs"));
        }
        files += 1;
    }
    if csv_string(&first) != csv_string(&second) {
        return Err("CSV text differs".into());
    }
    Ok(format!("two default sweeps, {files} output files byte-identical"))
}
