//! Tensorized multigrid for `A x = 0, sum(x) = 1`: factor-wise Galerkin
//! coarsening, TT-GMRES smoothing and a pluggable coarsest-grid solver.

mod cycle;
mod hierarchy;
mod smoother;
mod transfer;

pub use cycle::{coarse_solve_amen, coarse_solve_direct, multigrid_solve, v_cycle, CycleState, COARSE_DIRECT_LIMIT};
pub use hierarchy::{build_hierarchy, interpolation_rule, Hierarchy, Interpolation, Level, TransferFactors};
pub use smoother::{tt_gmres_smooth, tt_gmres_smooth_with_history};
pub use transfer::{coarse_points, coarsen_size, direct_interpolation, linear_interpolation};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solver for the coarsest-grid equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseSolver {
    /// Dense minimum-norm least-squares solve.
    Direct,
    /// AMEn on the normal equations.
    Amen,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MGConfig {
    pub nu1: usize,
    pub nu2: usize,
    /// Relative rounding accuracy of the restricted residual.
    pub restrict_tol: f64,
    /// Multiplier of the level and cycle adaptive iterate tolerance.
    pub trunc_factor: f64,
    /// Upper bound on the relative iterate rounding accuracy.
    pub max_rel_tol: f64,
    pub initial_max_rank: usize,
    pub rank_growth: f64,
    /// A cycle reducing the residual by less than this factor raises the rank cap.
    pub stagnation: f64,
    /// Applied to the truncation factor after a stagnating cycle whose
    /// iterate stayed below the rank cap.
    pub stagnation_tighten: f64,
    /// Smoothing steps that stagnation may add to each of `nu1` and `nu2`.
    pub max_extra_smoothing: usize,
    pub max_cycles: usize,
    /// Stop once `||A x|| <= 10^-tol_orders * ||A u||`, `u` the uniform distribution.
    pub tol_orders: f64,
    pub coarse: CoarseSolver,
    pub coarse_amen_sweeps: usize,
    pub coarse_amen_rank: usize,
    /// Sweep budget of the constrained AMEn run giving the initial guess.
    pub initial_sweeps: usize,
    pub seed: u64,
    #[serde(skip)]
    pub deadline: Option<Instant>,
}

impl Default for MGConfig {
    fn default() -> Self {
        Self {
            nu1: 3,
            nu2: 3,
            restrict_tol: 1e-1,
            trunc_factor: 10.0,
            max_rel_tol: 1e-1,
            initial_max_rank: 15,
            rank_growth: std::f64::consts::SQRT_2,
            stagnation: 0.9,
            stagnation_tighten: 0.1,
            max_extra_smoothing: 3,
            max_cycles: 50,
            tol_orders: 2.0,
            coarse: CoarseSolver::Direct,
            coarse_amen_sweeps: 5,
            coarse_amen_rank: 3,
            initial_sweeps: 10,
            seed: 0,
            deadline: None,
        }
    }
}

impl MGConfig {
    pub fn with_coarse(coarse: CoarseSolver) -> Self {
        Self { coarse, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.restrict_tol, self.trunc_factor, self.max_rel_tol, self.rank_growth, self.stagnation, self.stagnation_tighten, self.tol_orders];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("multigrid tolerances and factors must be positive: {self:?}")));
        }
        if self.rank_growth < 1.0 {
            return Err(Error::Config("rank growth factor must be >= 1".into()));
        }
        if self.initial_max_rank == 0 || self.max_cycles == 0 || self.coarse_amen_sweeps == 0 || self.initial_sweeps == 0 {
            return Err(Error::Config("rank cap, cycle and sweep limits must be positive".into()));
        }
        Ok(())
    }

    /// Report name of the method.
    pub fn method_name(&self) -> &'static str {
        match self.coarse {
            CoarseSolver::Direct => "multigrid",
            CoarseSolver::Amen => "multigrid-amen",
        }
    }
}
