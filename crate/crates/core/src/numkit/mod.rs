//! Dense factorizations, Krylov kernels and the brute-force stationary
//! oracle used to check the tensor solvers on small chains.

mod dense;
mod krylov;
mod oracle;

pub(crate) mod blas;

pub(crate) use dense::lu_solve_strict;
pub use dense::{dense_solve, lstsq_min_norm, DenseMatrix, LuSolution, PseudoInverse};
pub(crate) use krylov::hessenberg_lsq;
pub use krylov::{gmres_dense, minres, KrylovOutcome, LinearMap};
pub use oracle::{dense_stationary, pattern_strongly_connected, strongly_connected};
