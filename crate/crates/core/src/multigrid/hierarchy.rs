use log::debug;

use super::transfer::{coarsen_size, direct_interpolation, linear_weights};
use crate::error::Result;
use crate::models::KroneckerModel;
use crate::numkit::DenseMatrix;
use crate::tt::{TTOperator, TTTensor};

/// Interpolation rule for one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    Direct,
    Linear,
}

/// Per-mode interpolation `P_k` and restriction `Q_k = P_k^T` between two levels.
#[derive(Clone, Debug)]
pub struct TransferFactors {
    pub p: Vec<DenseMatrix>,
    pub q: Vec<DenseMatrix>,
}

impl TransferFactors {
    pub fn interpolate(&self, x: &TTTensor) -> Result<TTTensor> {
        TTOperator::apply_factors(&self.p, x)
    }

    pub fn restrict(&self, x: &TTTensor) -> Result<TTTensor> {
        TTOperator::apply_factors(&self.q, x)
    }
}

#[derive(Clone, Debug)]
pub struct Level {
    pub model: KroneckerModel,
    pub op: TTOperator,
    /// Galerkin images of the finest-level local subsystem operators.
    pub local_ops: Vec<DenseMatrix>,
}

/// Levels `0` (finest) to `L - 1` (coarsest) and the transfers between them.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    pub transfers: Vec<TransferFactors>,
}

impl Hierarchy {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn coarsest(&self) -> &Level {
        self.levels.last().expect("at least one level")
    }

    /// Interpolates a coarsest-level tensor up to the finest level.
    pub fn prolongate_from_coarsest(&self, x: &TTTensor) -> Result<TTTensor> {
        let mut x = x.clone();
        for t in self.transfers.iter().rev() {
            x = t.interpolate(&x)?;
        }
        Ok(x)
    }
}

/// Interpolation rule of mode `k`: direct everywhere for the overflow
/// family, direct on the first mode and linear elsewhere otherwise.
pub fn interpolation_rule(model: &KroneckerModel, k: usize) -> Interpolation {
    match model.kind() {
        Some(kind) if !kind.is_overflow_family() && k > 0 => Interpolation::Linear,
        _ => Interpolation::Direct,
    }
}

fn transfer_factor(rule: Interpolation, local: &DenseMatrix, n: usize) -> Result<DenseMatrix> {
    if n <= 3 {
        return Ok(DenseMatrix::identity(n));
    }
    if rule == Interpolation::Direct {
        match direct_interpolation(local) {
            Ok(p) => return Ok(p),
            Err(e) => debug!("direct interpolation unavailable ({e}), using linear weights"),
        }
    }
    Ok(linear_weights(n))
}

/// Coarsens every mode larger than 3 until all modes are at most 3, with
/// coarse factors `Q_k E_k^t P_k` computed term by term.
pub fn build_hierarchy(model: &KroneckerModel) -> Result<Hierarchy> {
    let d = model.d();
    let local_ops: Vec<DenseMatrix> = (0..d).map(|k| model.local_operator(k)).collect();
    let mut levels = vec![Level { model: model.clone(), op: model.to_operator()?, local_ops }];
    let mut transfers = Vec::new();
    while levels.last().expect("level").model.modes().iter().any(|&n| n > 3) {
        let fine = levels.last().expect("level");
        let modes = fine.model.modes().to_vec();
        let mut p = Vec::with_capacity(d);
        for k in 0..d {
            let rule = interpolation_rule(model, k);
            p.push(transfer_factor(rule, &fine.local_ops[k], modes[k])?);
            if modes[k] > 3 {
                debug_assert_eq!(p[k].cols(), coarsen_size(modes[k])?);
            }
        }
        let q: Vec<DenseMatrix> = p.iter().map(DenseMatrix::transpose).collect();
        let coarse = fine.model.galerkin(&q, &p)?;
        let coarse_local = (0..d)
            .map(|k| q[k].matmul(&fine.local_ops[k])?.matmul(&p[k]))
            .collect::<Result<Vec<_>>>()?;
        debug!("multigrid level {}: modes {:?}", levels.len(), coarse.modes());
        let op = coarse.to_operator()?;
        levels.push(Level { model: coarse, op, local_ops: coarse_local });
        transfers.push(TransferFactors { p, q });
    }
    Ok(Hierarchy { levels, transfers })
}
