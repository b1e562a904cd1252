//! Linear algebra for the three problem classes the scheme produces: SPD
//! projections, indefinite saddle-point blocks, and zero-mean Poisson
//! problems.

pub mod dense;
pub mod solvers;
pub mod sparse;

pub use solvers::{
    border, conjugate_gradient, dot, norm2, relative_residual, solve_constrained_poisson, solve_indefinite,
    solve_spd, CholeskyFactor, LdltFactor, LuFactor, NeumannPoisson, Method, SolveReport,
};
pub use sparse::{Block, BlockMatrix, SparseMatrix};
