use std::time::Instant;

use log::{debug, info, warn};

use super::hierarchy::{build_hierarchy, Hierarchy};
use super::smoother::{gmres, residual};
use super::{CoarseSolver, MGConfig};
use crate::amen::{amen_solve_system, spectral_norm_estimate, AmenConfig, AmenSystem, Variant};
use crate::error::{Error, Result};
use crate::models::{KroneckerModel, DENSE_STATE_LIMIT};
use crate::numkit::PseudoInverse;
use crate::report::{SolveReport, SolveStatus};
use crate::tt::{TTOperator, TTTensor, TruncationPolicy};

/// Largest coarsest grid handled by the dense solver.
pub const COARSE_DIRECT_LIMIT: usize = DENSE_STATE_LIMIT;

enum CoarseCache {
    Direct(PseudoInverse),
    Amen { system: AmenSystem, norm: f64 },
}

/// Coarsest-grid factorization and the tolerances of the current cycle.
pub struct CycleState {
    cache: CoarseCache,
    /// Relative rounding accuracy on the finest level: the previous outer
    /// residual times the truncation factor.
    pub tolerance: f64,
    /// Upper bound on every level's relative accuracy.
    pub max_tolerance: f64,
    pub max_rank: usize,
    /// Norm of the finest-level iterate at the start of the cycle.
    pub finest_norm: f64,
    // iterate norm per level from the latest visit
    level_norms: Vec<f64>,
    /// Outer residual after the previous cycle, relative to `||A u||`.
    pub relative_residual: f64,
    /// Sweeps used by each coarsest-grid AMEn solve.
    pub coarse_sweeps: Vec<usize>,
}

impl CycleState {
    pub fn new(h: &Hierarchy, coarse: CoarseSolver) -> Result<Self> {
        let level = h.coarsest();
        let cache = match coarse {
            CoarseSolver::Direct => CoarseCache::Direct(PseudoInverse::new(&dense_coarse(&level.model)?)),
            CoarseSolver::Amen => {
                let norm = spectral_norm_estimate(&level.op, 20, 1)?;
                CoarseCache::Amen { system: AmenSystem::new(&level.op)?, norm }
            }
        };
        Ok(Self {
            cache,
            tolerance: 0.0,
            max_tolerance: f64::INFINITY,
            max_rank: usize::MAX,
            finest_norm: 1.0,
            level_norms: vec![0.0; h.depth()],
            relative_residual: 1.0,
            coarse_sweeps: Vec::new(),
        })
    }

    /// Rounding on `level`: the finest-level accuracy scaled by the ratio of
    /// the level's iterate norm to the finest one. Without an iterate the
    /// norm from the previous visit is used.
    pub fn policy(&mut self, level: usize, iterate: Option<&TTTensor>) -> TruncationPolicy {
        if let Some(v) = iterate {
            self.level_norms[level] = v.norm();
        }
        let norm = match self.level_norms[level] {
            n if n > 0.0 => n,
            _ => self.finest_norm,
        };
        let ratio = if self.finest_norm > 0.0 { norm / self.finest_norm } else { 1.0 };
        TruncationPolicy::relative((self.tolerance * ratio).min(self.max_tolerance), self.max_rank)
    }
}

fn dense_coarse(model: &KroneckerModel) -> Result<crate::numkit::DenseMatrix> {
    let n = model.states();
    if n > COARSE_DIRECT_LIMIT {
        return Err(Error::Config(format!(
            "coarsest grid has {n} states, above the direct solver limit of {COARSE_DIRECT_LIMIT}; use the AMEn coarse solver"
        )));
    }
    model.assemble_dense()
}

fn pinv_apply(pinv: &PseudoInverse, r: &TTTensor) -> Result<TTTensor> {
    let e = pinv.apply(&r.to_dense()?);
    TTTensor::from_dense(&e, &r.modes(), &TruncationPolicy::relative(1e-12, usize::MAX))
}

/// Minimum-norm least-squares solution of `A_L e = b` by dense assembly.
pub fn coarse_solve_direct(model: &KroneckerModel, b: &TTTensor) -> Result<TTTensor> {
    if b.modes() != model.modes() {
        return Err(Error::DimensionMismatch("right-hand side modes differ from the model".into()));
    }
    pinv_apply(&PseudoInverse::new(&dense_coarse(model)?), b)
}

fn amen_config(norm: f64, target: f64, sweeps: usize, rank: usize) -> AmenConfig {
    let abs = if norm > 0.0 { 0.1 * target / norm } else { 0.0 };
    AmenConfig {
        enrichment_rank: rank,
        max_sweeps: sweeps,
        residual_target: target,
        truncation: TruncationPolicy::absolute(abs, 200),
        ..AmenConfig::default()
    }
}

/// AMEn on the normal equations of `A_L e = b`, stopping once
/// `||b - A_L e|| <= target` or after `sweeps` sweeps.
pub fn coarse_solve_amen(a: &TTOperator, b: &TTTensor, target: f64, sweeps: usize) -> Result<(TTTensor, SolveReport)> {
    let system = AmenSystem::new(a)?;
    let norm = spectral_norm_estimate(a, 20, 1)?;
    amen_solve_system(&system, Variant::Normal(b), &amen_config(norm, target, sweeps, 3), None)
}

// v + A_L^+ (b - A_L v) on the coarsest grid
fn coarse_correction(
    h: &Hierarchy,
    b: Option<&TTTensor>,
    v: Option<&TTTensor>,
    cfg: &MGConfig,
    state: &mut CycleState,
) -> Result<TTTensor> {
    let op = &h.coarsest().op;
    let Some(r) = residual(op, b, v)? else {
        return TTTensor::zeros(&op.modes());
    };
    let e = match &state.cache {
        CoarseCache::Direct(pinv) => pinv_apply(pinv, &r)?,
        CoarseCache::Amen { system, norm } => {
            let target = state.relative_residual * r.norm();
            let mut acfg = amen_config(*norm, target, cfg.coarse_amen_sweeps, cfg.coarse_amen_rank);
            acfg.seed = cfg.seed;
            acfg.deadline = cfg.deadline;
            let (e, rep) = amen_solve_system(system, Variant::Normal(&r), &acfg, None)?;
            if rep.status == SolveStatus::Failed {
                warn!("coarse AMEn solve failed, continuing with its best iterate");
            }
            state.coarse_sweeps.push(rep.iterations);
            e
        }
    };
    let level = h.depth() - 1;
    match v {
        Some(v) => {
            let v = v.add(&e)?;
            let policy = state.policy(level, Some(&v));
            Ok(v.truncate(&policy))
        }
        None => {
            state.policy(level, Some(&e));
            Ok(e)
        }
    }
}

/// One V-cycle for `A_l v = b` at `level`; a missing `b` or `v` stands for zero.
pub fn v_cycle(
    h: &Hierarchy,
    level: usize,
    b: Option<&TTTensor>,
    v: Option<&TTTensor>,
    cfg: &MGConfig,
    state: &mut CycleState,
) -> Result<TTTensor> {
    if level >= h.depth() {
        return Err(Error::InvalidArgument(format!("level {level} outside a {}-level hierarchy", h.depth())));
    }
    if level + 1 == h.depth() {
        return coarse_correction(h, b, v, cfg, state);
    }
    let op = &h.levels[level].op;
    let policy = state.policy(level, v);
    let mut v = match (cfg.nu1, v) {
        (0, v) => v.cloned(),
        (steps, v) => Some(gmres(op, b, v, steps, &policy)?.0),
    };
    let restrict = TruncationPolicy::relative(cfg.restrict_tol, state.max_rank);
    let r = residual(op, b, v.as_ref())?;
    if let Some(r) = r {
        let bc = h.transfers[level].restrict(&r.truncate(&restrict))?;
        let e = v_cycle(h, level + 1, Some(&bc), None, cfg, state)?;
        let pe = h.transfers[level].interpolate(&e)?;
        let sum = match v {
            Some(v) => v.add(&pe)?,
            None => pe,
        };
        let policy = state.policy(level, Some(&sum));
        v = Some(sum.truncate(&policy));
    }
    if cfg.nu2 > 0 {
        let policy = state.policy(level, v.as_ref());
        v = Some(gmres(op, b, v.as_ref(), cfg.nu2, &policy)?.0);
    }
    match v {
        Some(v) => Ok(v),
        None => TTTensor::zeros(&op.modes()),
    }
}

fn normalized(x: TTTensor) -> Option<TTTensor> {
    let s = x.sum();
    (s.is_finite() && s != 0.0).then(|| x.scale(1.0 / s))
}

// constrained AMEn on the coarsest grid, interpolated to the finest
fn initial_guess(h: &Hierarchy, cfg: &MGConfig) -> Result<TTTensor> {
    let coarse = h.coarsest();
    let modes = coarse.op.modes();
    let n: f64 = modes.iter().map(|&m| m as f64).product();
    let reference = coarse.op.apply(&TTTensor::constant(&modes, 1.0 / n)?)?.norm();
    let acfg = AmenConfig {
        max_sweeps: cfg.initial_sweeps,
        residual_target: 1e-12 * reference,
        truncation: TruncationPolicy::relative(1e-10, 200),
        seed: cfg.seed,
        deadline: cfg.deadline,
        ..AmenConfig::default()
    };
    let (xc, _) = amen_solve_system(&AmenSystem::new(&coarse.op)?, Variant::Constrained, &acfg, None)?;
    let fine_modes = h.levels[0].op.modes();
    let uniform = || {
        let n: f64 = fine_modes.iter().map(|&m| m as f64).product();
        TTTensor::constant(&fine_modes, 1.0 / n)
    };
    match normalized(h.prolongate_from_coarsest(&xc)?) {
        Some(x) => Ok(x),
        None => {
            warn!("interpolated initial guess has zero sum, starting from the uniform distribution");
            uniform()
        }
    }
}

/// Multigrid cycles on `A x = 0`, renormalizing `sum(x) = 1` after each cycle.
pub fn multigrid_solve(model: &KroneckerModel, cfg: &MGConfig) -> Result<(TTTensor, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let h = build_hierarchy(model)?;
    let a = &h.levels[0].op;
    let modes = a.modes();
    let n: f64 = modes.iter().map(|&m| m as f64).product();
    let reference = a.apply(&TTTensor::constant(&modes, 1.0 / n)?)?.norm();
    let target = 10f64.powf(-cfg.tol_orders) * reference;
    let method = cfg.method_name();
    let mut report = SolveReport::new(method, target, reference);
    debug!("{method}: {} levels, coarsest modes {:?}", h.depth(), h.coarsest().op.modes());

    let mut state = CycleState::new(&h, cfg.coarse)?;
    let mut x = initial_guess(&h, cfg)?;
    let mut rho = a.apply(&x)?.norm();
    let mut cap = cfg.initial_max_rank;
    let mut factor = cfg.trunc_factor;
    let mut cycle_cfg = cfg.clone();
    let mut best = (rho, x.clone());
    report.status = SolveStatus::MaxIterations;
    for c in 0..cfg.max_cycles {
        let xn = x.norm();
        state.tolerance = factor * rho;
        state.max_tolerance = cfg.max_rel_tol;
        state.max_rank = cap;
        state.finest_norm = xn;
        state.relative_residual = if reference > 0.0 { rho / reference } else { 0.0 };
        let v = v_cycle(&h, 0, None, Some(&x), &cycle_cfg, &mut state)?;
        let Some(next) = normalized(v) else {
            report.status = SolveStatus::Failed;
            report.notes.push(format!("cycle {} produced an iterate with zero or non-finite sum", c + 1));
            break;
        };
        x = next;
        let res = a.apply(&x)?.norm();
        report.push(res, x.max_rank(), start.elapsed().as_secs_f64());
        debug!("{method} cycle {}: residual {res:.3e}, max rank {}, cap {cap}", c + 1, x.max_rank());
        if res < best.0 {
            best = (res, x.clone());
        }
        if !res.is_finite() {
            report.status = SolveStatus::Failed;
            report.notes.push("residual became non-finite".into());
            break;
        }
        if res <= target {
            report.status = SolveStatus::Converged;
            break;
        }
        if res > cfg.stagnation * rho {
            // a cap that did not bind cannot be the culprit: tighten the
            // rounding and smooth more
            if x.max_rank() < cap {
                factor *= cfg.stagnation_tighten;
                if cycle_cfg.nu1 < cfg.nu1 + cfg.max_extra_smoothing {
                    cycle_cfg.nu1 += 1;
                    cycle_cfg.nu2 += 1;
                }
            }
            cap = (cap as f64 * cfg.rank_growth).ceil() as usize;
        }
        rho = res;
        if cfg.deadline.is_some_and(|t| Instant::now() >= t) {
            report.status = SolveStatus::Timeout;
            break;
        }
    }
    report.coarse_sweeps = std::mem::take(&mut state.coarse_sweeps);
    report.wall_seconds = start.elapsed().as_secs_f64();
    info!(
        "{method}: {:?} after {} cycles, residual {:.3e}, max rank {}",
        report.status,
        report.iterations,
        report.final_residual().unwrap_or(f64::NAN),
        report.max_rank()
    );
    if report.status.is_converged() {
        Ok((x, report))
    } else {
        Ok((best.1, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelKind, ModelSpec};
    use crate::numkit::dense_stationary;
    use rand::SeedableRng;

    fn overflow(d: usize, cap: usize) -> KroneckerModel {
        build_model(&ModelSpec::new(ModelKind::Overflow, d, cap)).unwrap()
    }

    fn max_err(model: &KroneckerModel, x: &TTTensor) -> f64 {
        let exact = dense_stationary(&model.assemble_dense().unwrap()).unwrap();
        exact.iter().zip(&x.to_dense().unwrap()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    // consistent right-hand side A y
    fn range_rhs(op: &TTOperator, seed: u64) -> TTTensor {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let y = TTTensor::random(&op.modes(), &vec![2; op.d() - 1], &mut rng).unwrap();
        op.apply(&y).unwrap()
    }

    #[test]
    fn direct_zero_rhs_gives_zero() {
        let model = overflow(3, 2);
        let e = coarse_solve_direct(&model, &TTTensor::zeros(model.modes()).unwrap()).unwrap();
        assert_eq!(e.norm(), 0.0);
    }

    #[test]
    fn direct_guard_rejects_large_grids() {
        let model = overflow(12, 2);
        let b = TTTensor::zeros(model.modes()).unwrap();
        assert!(matches!(coarse_solve_direct(&model, &b), Err(Error::Config(_))));
    }

    #[test]
    fn coarse_solvers_agree() {
        let model = overflow(3, 2);
        let op = model.to_operator().unwrap();
        let b = range_rhs(&op, 1);
        let ed = coarse_solve_direct(&model, &b).unwrap();
        let (ea, rep) = coarse_solve_amen(&op, &b, 1e-9 * b.norm(), 5).unwrap();
        assert!(rep.iterations <= 5);
        let rd = b.sub(&op.apply(&ed).unwrap()).unwrap().norm();
        let ra = b.sub(&op.apply(&ea).unwrap()).unwrap().norm();
        assert!(rd <= 1e-10 * b.norm() && ra <= 1e-6 * b.norm(), "{rd:.2e} {ra:.2e}");
        // same solution up to the null space of A
        let ones = TTTensor::ones(model.modes()).unwrap();
        let pi = TTTensor::from_dense(
            &dense_stationary(&model.assemble_dense().unwrap()).unwrap(),
            model.modes(),
            &TruncationPolicy::relative(1e-14, usize::MAX),
        )
        .unwrap();
        let pi = pi.scale(1.0 / pi.norm());
        let diff = ed.sub(&ea).unwrap();
        let diff = diff.sub(&pi.scale(diff.inner(&pi).unwrap())).unwrap();
        assert!(diff.norm() <= 1e-6 * ed.norm(), "{:.2e}", diff.norm());
        assert!(ones.norm() > 0.0);
    }

    #[test]
    fn amen_zero_rhs_and_sweep_cap() {
        let model = overflow(3, 4);
        let op = model.to_operator().unwrap();
        let (e, _) = coarse_solve_amen(&op, &TTTensor::zeros(model.modes()).unwrap(), 0.0, 5).unwrap();
        assert_eq!(e.norm(), 0.0);
        let (_, rep) = coarse_solve_amen(&op, &range_rhs(&op, 2), 0.0, 5).unwrap();
        assert!(rep.iterations <= 5);
    }

    #[test]
    fn one_level_hierarchy_is_the_coarse_solve() {
        let model = overflow(3, 2);
        for coarse in [CoarseSolver::Direct, CoarseSolver::Amen] {
            let cfg = MGConfig { tol_orders: 6.0, ..MGConfig::with_coarse(coarse) };
            let (x, rep) = multigrid_solve(&model, &cfg).unwrap();
            assert!(rep.status.is_converged(), "{coarse:?}");
            assert!(max_err(&model, &x) < 1e-6);
        }
    }

    #[test]
    fn residual_decreases_over_cycles_with_tight_rounding() {
        let model = overflow(2, 8);
        let cfg = MGConfig { tol_orders: 12.0, max_cycles: 10, trunc_factor: 1e-3, ..MGConfig::default() };
        let (_, rep) = multigrid_solve(&model, &cfg).unwrap();
        assert!(rep.residuals.windows(2).all(|w| w[1] < w[0]), "{:?}", rep.residuals);
        let a = model.to_operator().unwrap();
        assert!(rep.final_residual().unwrap() <= rep.reference_residual);
        assert!(a.d() == 2);
    }

    #[test]
    fn matches_oracle() {
        let model = overflow(3, 4);
        for coarse in [CoarseSolver::Direct, CoarseSolver::Amen] {
            let cfg = MGConfig { tol_orders: 6.0, ..MGConfig::with_coarse(coarse) };
            let (x, rep) = multigrid_solve(&model, &cfg).unwrap();
            assert!(rep.status.is_converged(), "{coarse:?}: {:?}", rep.residuals);
            assert!(max_err(&model, &x) <= 1e-4);
            assert!((x.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn level_out_of_range() {
        let model = overflow(2, 4);
        let h = build_hierarchy(&model).unwrap();
        let mut state = CycleState::new(&h, CoarseSolver::Direct).unwrap();
        assert!(v_cycle(&h, h.depth(), None, None, &MGConfig::default(), &mut state).is_err());
    }
}
