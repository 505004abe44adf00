//! Solution path clustering on a (sub)sample: concave fusion penalty,
//! majorization-minimization solver, adaptive penalty path and solution
//! selection.

mod path;
mod penalty;
mod solver;

pub use path::{
    default_merge_tol, extract_partition, run_spc, select_penalty, select_solution, DistanceBasis, Selection,
    SolutionPath, SpcConfig, SpcSolution, DEFAULT_MERGE_TOL_SCALE,
};
pub use penalty::{mcp, mcp_derivative, PenaltyParams};
pub use solver::{mm_sweep, objective, solve_fixed_penalty, FixedPenaltySolution, SolveOptions};
