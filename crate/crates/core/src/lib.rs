//! Steady-state solvers for Markov chains whose transposed generator is a
//! sum of Kronecker products of small per-subsystem factors.
//!
//! The stationary vector `x` with `A x = 0`, `sum(x) = 1` is represented in
//! the tensor-train (TT) format and computed by one of three methods:
//!
//! * [`amen::amen_stationary`]: alternating minimal energy on the constrained
//!   least-squares formulation,
//! * [`multigrid::multigrid_solve`] with [`multigrid::CoarseSolver::Direct`]:
//!   tensorized multigrid with a dense coarsest-grid solve,
//! * [`multigrid::multigrid_solve`] with [`multigrid::CoarseSolver::Amen`]:
//!   the same V-cycle with AMEn on the normal equations at the coarsest grid.
//!
//! Index linearization throughout is "first mode fastest": the entry
//! `X(i_1, ..., i_d)` sits at position `i_1 + i_2 n_1 + i_3 n_1 n_2 + ...`
//! of `vec(X)`.

pub mod amen;
pub mod error;
pub mod models;
pub mod multigrid;
pub mod numkit;
pub mod report;
pub mod tt;

pub use error::{Error, Result};
pub use models::{build_model, KroneckerModel, ModelKind, ModelSpec};
pub use numkit::DenseMatrix;
pub use report::{SolveReport, SolveStatus};
pub use tt::{TTOperator, TTTensor, TruncationPolicy};
