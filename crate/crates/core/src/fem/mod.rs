//! Finite-element kernels and linear solvers.

pub mod banded;
pub mod constraints;
pub mod dense;
pub mod elasticity;
pub mod element;
pub mod hermite;
pub mod slice;
pub mod solve;
pub mod sparse;

pub use constraints::{apply_constraints, ConstraintMap, MeanZeroFunctional, ReducedSystem};
pub use dense::dense_oracle_solve;
pub use elasticity::{element_stiffness_elasticity, ElasticTensor, Lame};
pub use solve::{solve_saddle, solve_spd, OrderedSolver, SaddleMethod, SaddleSystem, SolveConfig, SolveError, SolveReport};
pub use sparse::{SparseOperator, TripletBuilder};
