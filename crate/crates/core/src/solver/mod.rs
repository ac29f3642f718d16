//! Positive solutions of the discrete problem: damped Newton, bubble
//! ansätze, continuation in `p` and deflation.

mod ansatz;
mod config;
mod continuation;
mod newton;

pub use ansatz::{bubble_ansatz, bubble_epsilon, far_field_corrected, multi_bubble_ansatz, AnsatzSite, FLOOR_FRACTION};
pub use config::SolveConfig;
pub use continuation::{continue_in_p, multi_peak_solve, solve_branch, solve_from_ansatz, BranchEntry, SolutionBranch};
pub use newton::{newton_solve, newton_solve_with, BoundarySolution, Deflation, Discretization, NeumannData};
