//! Resource allocation on a flexible-numerology 5G NR mini-slot grid.
//!
//! * [`grid`]: mini-slots, block placements per numerology, coverage and conflicts.
//! * [`rate`]: users, achievable rates and the URLLC latency mask.
//! * [`ilp`]: the P0 (hard URLLC demands) and P1 (capped URLLC demands) binary
//!   programs and an exact branch-and-bound solver.
//! * [`heuristic`]: the two-step best-effort scheduler.
//! * [`harness`]: scenarios, sweeps, metrics and CSV / plot-data output.

pub mod error;
pub mod grid;
pub mod harness;
pub mod heuristic;
pub mod ilp;
pub mod rate;

pub use error::{Error, Result};
pub use grid::{Grid, GridConfig, MiniSlot, Numerology, NumerologySpec, ResourceBlock};
pub use heuristic::{run_heuristic, Coverage, HeuristicResult};
pub use ilp::{
    build_p0, build_p1, solve_exact, verify_allocation, Allocation, Assignment, Formulation, IlpInstance, SolveResult,
    SolveStatus, Violation,
};
pub use rate::{build_rate_matrix, RateMatrix, RateModelParams, ServiceClass, User};
