//! Alternating least squares with residual-based rank enrichment (AMEn) for
//! `min ||A x||` under `sum(x) = 1`, and for the normal equations of `A x = b`.

mod frames;
mod reduced;
mod solver;

pub use frames::{frame_left, frame_right, local_apply, Frame};
pub use reduced::{
    build_reduced, solve_local_constrained, solve_local_normal, LocalSolution, LocalSolveConfig, ReducedMap,
    ReducedProblem,
};
pub use solver::{
    amen_solve, amen_stationary, amen_solve_system, approx_residual, enrich, spectral_norm_estimate, AmenConfig, AmenSystem, Variant,
};
