//! Certified tube synthesis from sampled constraints.
//!
//! The continuous-time tube conditions are replaced by constraints at the
//! sample times of an `epsilon`-covering plan. A tube whose worst sampled
//! margin `eta*` satisfies `eta* + L * epsilon <= 0`, with `L` a Lipschitz
//! bound of every margin in time, satisfies the conditions everywhere.

mod certify;
mod init;
mod problem;
mod sampling;
mod solver;

pub use certify::{certify, verify_dense, Certificate, DenseReport, WorstMargin};
pub use init::{base_coefficients, initial_path, initialize_coefficients, InitialPath};
pub use problem::{constraint_values, tube_margins, Layout, Margins, SopProblem};
pub use sampling::{make_sampling_plan, SamplingPlan};
pub use solver::{solve_sop, SolveOutcome, SolverOptions};
