//! Finite-volume solvers for the singular-drift equation, the nonlocal
//! modulus equation and the fundamental solution.

pub mod fundamental;
pub mod grid;
pub mod nonlocal;
pub mod norms;
pub mod solver;
pub mod tridiag;

pub use grid::{GridPreset, SpatialGrid};
pub use fundamental::{fundamental_row_adjoint, fundamental_solution, AdjointRows, FundamentalSolution};
pub use nonlocal::{solve_nonlocal, NonlocalProblem};
pub use norms::{check_symmetry_S, field_norms, NormRow, SolutionField, SymmetryCheck};
pub use solver::{solve_linear, solve_linear_between, Boundary, Forcing, LinearProblem, Scheme, SolverConfig};
