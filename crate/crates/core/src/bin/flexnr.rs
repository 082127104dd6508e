use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use flexnr::harness::{emit_csv, emit_plot_data, options_for, run_method, sweep, Method, Metrics, Scenario, SweepSpec};
use flexnr::ilp::{build_p0, build_p1};
use flexnr::{Error, Grid};

#[derive(Parser)]
#[command(
    name = "flexnr",
    version,
    about = "Flexible-numerology URLLC/eMBB resource allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    P0,
    P1,
    Heuristic,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::P0 => Method::P0,
            MethodArg::P1 => Method::P1,
            MethodArg::Heuristic => Method::Heuristic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with one method.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Write the metrics row as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        node_limit: Option<u64>,
        /// Write the P0/P1 model in CPLEX LP format.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
        /// Print the chosen (block, user) pairs.
        #[arg(long)]
        show_allocation: bool,
    },
    /// Run a latency x demand sweep and write results.csv plus plot data.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        node_limit: Option<u64>,
    },
    /// Check a scenario file without solving it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run all three methods on a scenario and print a table.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        node_limit: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let internal = e
                .chain()
                .any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_internal));
            ExitCode::from(if internal { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve {
            scenario,
            method,
            out,
            node_limit,
            dump_lp,
            show_allocation,
        } => solve(
            &scenario,
            method.into(),
            out.as_deref(),
            node_limit,
            dump_lp.as_deref(),
            show_allocation,
        ),
        Command::Sweep {
            spec,
            out_dir,
            node_limit,
        } => run_sweep(&spec, &out_dir, node_limit),
        Command::Validate { scenario } => validate(&scenario),
        Command::Compare {
            scenario,
            node_limit,
            out,
        } => compare(&scenario, node_limit, out.as_deref()),
    }
}

fn print_table(rows: &[Metrics]) {
    let cell = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into());
    println!(
        "{:<10} {:<11} {:>14} {:>9} {:>6} {:>10} {:>10}",
        "method", "status", "embb_kbps", "coverage", "full", "nodes", "wall_s"
    );
    for m in rows {
        println!(
            "{:<10} {:<11} {:>14} {:>9} {:>6} {:>10} {:>10}",
            m.method.as_str(),
            m.status.as_str(),
            cell(m.embb_sum_kbps, 3),
            cell(m.urllc_coverage, 4),
            m.fully_covered.map(|n| n.to_string()).unwrap_or_else(|| "-".into()),
            m.nodes.map(|n| n.to_string()).unwrap_or_else(|| "-".into()),
            cell(m.wall_time_s, 3),
        );
    }
}

fn solve(
    path: &Path,
    method: Method,
    out: Option<&Path>,
    node_limit: Option<u64>,
    dump_lp: Option<&Path>,
    show_allocation: bool,
) -> anyhow::Result<()> {
    let scenario = Scenario::load(path)?;
    let prepared = scenario.prepare()?;
    if let Some(lp_path) = dump_lp {
        let instance = match method {
            Method::P1 => build_p1(&prepared.grid, &prepared.users, &prepared.rates)?,
            _ => build_p0(&prepared.grid, &prepared.users, &prepared.rates)?,
        };
        let mut file = std::fs::File::create(lp_path).with_context(|| format!("creating {}", lp_path.display()))?;
        instance
            .write_lp(&mut file)
            .with_context(|| format!("writing {}", lp_path.display()))?;
    }
    let options = options_for(&scenario, node_limit, true);
    let outcome = run_method(&prepared, method, &options)?;
    print_table(std::slice::from_ref(&outcome.metrics));
    if show_allocation {
        if let Some(alloc) = &outcome.allocation {
            for a in &alloc.assignments {
                let b = &prepared.grid.blocks()[a.block];
                println!(
                    "block {:>5} (mu {}, f0 {}, t0 {}) -> user {}",
                    a.block, b.numerology_mu, b.f0, b.t0, a.user
                );
            }
        }
    }
    if let Some(out) = out {
        emit_csv(std::slice::from_ref(&outcome.metrics), out)?;
    }
    Ok(())
}

fn run_sweep(spec_path: &Path, out_dir: &Path, node_limit: Option<u64>) -> anyhow::Result<()> {
    let spec = SweepSpec::load(spec_path)?;
    let rows = sweep(&spec, node_limit)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let csv_path = out_dir.join("results.csv");
    emit_csv(&rows, &csv_path)?;
    let plots = emit_plot_data(&rows, out_dir)?;
    println!(
        "{} rows -> {}; {} plot files in {}",
        rows.len(),
        csv_path.display(),
        plots.len(),
        out_dir.display()
    );
    Ok(())
}

fn validate(path: &Path) -> anyhow::Result<()> {
    let scenario = Scenario::load(path)?;
    let prepared = scenario.prepare()?;
    let grid: &Grid = &prepared.grid;
    println!(
        "grid {}x{} (mu_max {}, block area {}), {} blocks",
        grid.freq_units(),
        grid.time_units(),
        grid.mu_max(),
        grid.block_area(),
        grid.blocks().len()
    );
    for n in grid.numerologies() {
        let count = grid.blocks().iter().filter(|b| b.numerology_mu == n.mu).count();
        println!(
            "  mu {}: {}x{} footprint, {} placements",
            n.mu, n.freq_width, n.time_len, count
        );
    }
    for mu in grid.empty_numerologies() {
        println!("  warning: numerology {mu} does not fit the grid");
    }
    let urllc = prepared.users.iter().filter(|u| u.is_urllc()).count();
    println!(
        "{} users ({} URLLC, {} eMBB)",
        prepared.users.len(),
        urllc,
        prepared.users.len() - urllc
    );
    println!("ok");
    Ok(())
}

fn compare(path: &Path, node_limit: Option<u64>, out: Option<&Path>) -> anyhow::Result<()> {
    let scenario = Scenario::load(path)?;
    let prepared = scenario.prepare()?;
    let options = options_for(&scenario, node_limit, true);
    let rows = Method::ALL
        .iter()
        .map(|&m| run_method(&prepared, m, &options).map(|o| o.metrics))
        .collect::<Result<Vec<_>, _>>()?;
    print_table(&rows);
    if let Some(out) = out {
        emit_csv(&rows, out)?;
    }
    Ok(())
}
