//! Solver telemetry shared by all methods.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Timeout,
    Failed,
}

impl SolveStatus {
    pub fn is_converged(self) -> bool {
        self == SolveStatus::Converged
    }
}

/// Local-solve record for one core update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSolveInfo {
    pub sweep: usize,
    pub core: usize,
    pub dim: usize,
    pub direct: bool,
    /// Condition estimate of the dense reduced matrix (direct path only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `sqrt(g^T M g)` after the update: the local objective `||A x||`.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub status: SolveStatus,
    /// Residual norm `||A x||` (or `||b - A x||`) after each iteration.
    pub residuals: Vec<f64>,
    /// Largest TT rank of the iterate after each iteration.
    pub max_ranks: Vec<usize>,
    pub iterations: usize,
    /// Stopping threshold on the residual norm.
    pub target: f64,
    /// Residual norm of the normalized all-ones tensor, the reference scale.
    pub reference_residual: f64,
    pub wall_seconds: f64,
    /// Wall time at the end of each iteration.
    pub iteration_seconds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub local_solves: Vec<LocalSolveInfo>,
    /// Sweeps spent by the coarsest-grid AMEn solver, one entry per solve.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coarse_sweeps: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SolveReport {
    pub fn new(method: impl Into<String>, target: f64, reference_residual: f64) -> Self {
        Self {
            method: method.into(),
            status: SolveStatus::MaxIterations,
            residuals: Vec::new(),
            max_ranks: Vec::new(),
            iterations: 0,
            target,
            reference_residual,
            wall_seconds: 0.0,
            iteration_seconds: Vec::new(),
            local_solves: Vec::new(),
            coarse_sweeps: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, residual: f64, max_rank: usize, elapsed: f64) {
        self.residuals.push(residual);
        self.max_ranks.push(max_rank);
        self.iteration_seconds.push(elapsed);
        self.iterations = self.residuals.len();
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }

    pub fn max_rank(&self) -> usize {
        self.max_ranks.iter().copied().max().unwrap_or(0)
    }
}
