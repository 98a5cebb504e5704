//! Small dense solvers for the two optimisation shapes used by the designers.

mod lp;
mod qp;

pub use lp::{solve_lp, solve_lp_with, LinearProgram, LpResiduals, LpSolution, LpTolerances};
pub use qp::{solve_eq_qp, EqualityQp, QpSolution};
