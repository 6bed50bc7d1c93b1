use std::time::Instant;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frames::{frame_left, frame_right, local_apply, Frame};
use super::reduced::{solve_local_constrained, solve_local_normal, LocalSolveConfig, ReducedMap, ReducedProblem};
use crate::error::{Error, Result};
use crate::numkit::blas::{dot, matmul, norm2};
use crate::numkit::LinearMap;
use crate::report::{LocalSolveInfo, SolveReport, SolveStatus};
use crate::tt::linalg::{choose_rank, lq_thin, qr_thin, svd_thin};
use crate::tt::{Core, TTOperator, TTTensor, TruncationPolicy};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmenConfig {
    /// Rank of the residual approximation used for enrichment; 0 gives plain ALS.
    pub enrichment_rank: usize,
    pub max_sweeps: usize,
    /// Absolute stopping threshold on the residual norm.
    pub residual_target: f64,
    pub local_direct_threshold: usize,
    pub local_iter_tol: f64,
    pub local_iter_maxit: usize,
    /// Rounding of each updated core.
    pub truncation: TruncationPolicy,
    pub seed: u64,
    #[serde(skip)]
    pub deadline: Option<Instant>,
}

impl Default for AmenConfig {
    fn default() -> Self {
        Self {
            enrichment_rank: 3,
            max_sweeps: 20,
            residual_target: 0.0,
            local_direct_threshold: 1000,
            local_iter_tol: 1e-10,
            local_iter_maxit: 2000,
            truncation: TruncationPolicy::absolute(1e-10, 200),
            seed: 0,
            deadline: None,
        }
    }
}

impl AmenConfig {
    pub fn validate(&self) -> Result<()> {
        self.truncation.validate()?;
        if self.max_sweeps == 0 || self.local_direct_threshold == 0 || self.local_iter_maxit == 0 {
            return Err(Error::Config("sweep and iteration limits must be positive".into()));
        }
        if !(self.local_iter_tol > 0.0) || !(self.residual_target >= 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn local(&self) -> LocalSolveConfig {
        LocalSolveConfig {
            direct_threshold: self.local_direct_threshold,
            iter_tol: self.local_iter_tol,
            iter_maxit: self.local_iter_maxit,
        }
    }
}

/// Which least-squares problem is solved.
#[derive(Clone, Copy, Debug)]
pub enum Variant<'a> {
    /// `min ||A x||` subject to `sum(x) = 1`.
    Constrained,
    /// `min ||b - A x||` (normal equations, no constraint).
    Normal(&'a TTTensor),
}

/// An operator prepared for AMEn: `A`, `A^T` and the compressed `A^T A`.
#[derive(Clone, Debug)]
pub struct AmenSystem {
    a: TTOperator,
    at: TTOperator,
    ata: TTOperator,
    ident: TTOperator,
}

impl AmenSystem {
    pub fn new(a: &TTOperator) -> Result<Self> {
        let at = a.transpose();
        let ata = at.compose(a)?.compress(1e-14);
        let ident = TTOperator::identity(&a.modes())?;
        Ok(Self { a: a.clone(), at, ata, ident })
    }

    pub fn operator(&self) -> &TTOperator {
        &self.a
    }

    pub fn normal_operator(&self) -> &TTOperator {
        &self.ata
    }
}

// tensor slots
const X: usize = 0;
const Z: usize = 1;
const RHS: usize = 2;
const ONES: usize = 3;
// operator slots
const OP_ATA: usize = 0;
const OP_A: usize = 1;
const OP_AT: usize = 2;
const OP_I: usize = 3;

struct Channel {
    y: usize,
    op: usize,
    v: usize,
    left: Vec<Frame>,
    right: Vec<Frame>,
}

/// Tensors, operators and the interface frames between them.
struct Workspace<'a> {
    d: usize,
    tensors: Vec<Option<TTTensor>>,
    ops: [&'a TTOperator; 4],
    channels: Vec<Channel>,
}

impl<'a> Workspace<'a> {
    fn new(sys: &'a AmenSystem, d: usize) -> Self {
        Self { d, tensors: vec![None, None, None, None], ops: [&sys.ata, &sys.a, &sys.at, &sys.ident], channels: Vec::new() }
    }

    fn t(&self, slot: usize) -> &TTTensor {
        self.tensors[slot].as_ref().expect("tensor slot populated")
    }

    fn t_mut(&mut self, slot: usize) -> &mut TTTensor {
        self.tensors[slot].as_mut().expect("tensor slot populated")
    }

    fn channel(&mut self, y: usize, op: usize, v: usize) -> usize {
        if let Some(i) = self.channels.iter().position(|c| c.y == y && c.op == op && c.v == v) {
            return i;
        }
        let d = self.d;
        self.channels.push(Channel { y, op, v, left: vec![Frame::unit(); d + 1], right: vec![Frame::unit(); d + 1] });
        self.channels.len() - 1
    }

    fn update_left(&mut self, c: usize, k: usize) {
        let ch = &self.channels[c];
        let f = frame_left(&ch.left[k], self.t(ch.y).core(k), self.ops[ch.op].core(k), self.t(ch.v).core(k));
        self.channels[c].left[k + 1] = f;
    }

    fn update_right(&mut self, c: usize, k: usize) {
        let ch = &self.channels[c];
        let f = frame_right(&ch.right[k + 1], self.t(ch.y).core(k), self.ops[ch.op].core(k), self.t(ch.v).core(k));
        self.channels[c].right[k] = f;
    }

    fn update_all_left(&mut self, k: usize) {
        for c in 0..self.channels.len() {
            self.update_left(c, k);
        }
    }

    fn update_all_right(&mut self, k: usize) {
        for c in 0..self.channels.len() {
            self.update_right(c, k);
        }
    }

    /// `sum coef * (left of ch_l) Op_k V_k (right of ch_r)` over target terms.
    fn project(&self, terms: &[(usize, usize, f64)], left: &[usize], right: &[usize], k: usize) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for (t, &(op, v, coef)) in terms.iter().enumerate() {
            let (cl, cr) = (&self.channels[left[t]], &self.channels[right[t]]);
            let part = local_apply(&cl.left[k], self.ops[op].core(k), self.t(v).core(k), &cr.right[k + 1]);
            if out.is_empty() {
                out = part.iter().map(|p| coef * p).collect();
            } else {
                out.iter_mut().zip(&part).for_each(|(o, p)| *o += coef * p);
            }
        }
        out
    }
}

/// Ranks capped by the mode products on either side.
fn feasible_ranks(modes: &[usize], rank: usize) -> Vec<usize> {
    let d = modes.len();
    (1..d)
        .map(|k| {
            let left: usize = modes[..k].iter().fold(1usize, |a, &n| a.saturating_mul(n));
            let right: usize = modes[k..].iter().fold(1usize, |a, &n| a.saturating_mul(n));
            rank.min(left).min(right).max(1)
        })
        .collect()
}

fn random_basis(modes: &[usize], rank: usize, seed: u64) -> Result<TTTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = TTTensor::random(modes, &feasible_ranks(modes, rank), &mut rng)?;
    Ok(x.orthogonalize(0))
}

fn target_terms(variant: &Variant) -> Vec<(usize, usize, f64)> {
    match variant {
        Variant::Constrained => vec![(OP_A, X, -1.0)],
        Variant::Normal(_) => vec![(OP_AT, RHS, 1.0), (OP_ATA, X, -1.0)],
    }
}

/// Row-major `(l*n) x r` left factor times `(r x m)`.
fn mul_right(core: &Core, m: &[f64], cols: usize) -> Core {
    let (l, n, r) = (core.left(), core.mode(), core.right());
    Core::from_parts(l, n, cols, matmul(core.data(), false, m, false, l * n, r, cols))
}

/// `(rows x l)` matrix times the right-unfolded core.
fn mul_left(m: &[f64], rows: usize, core: &Core) -> Core {
    let (l, n, r) = (core.left(), core.mode(), core.right());
    Core::from_parts(rows, n, r, matmul(m, false, core.data(), false, rows, l, n * r))
}

fn truncated_left(u: &[f64], p: usize, rows: usize, keep: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * keep);
    for row in 0..rows {
        out.extend_from_slice(&u[row * p..row * p + keep]);
    }
    out
}

struct Sweeper<'a> {
    ws: Workspace<'a>,
    constrained: bool,
    terms: Vec<(usize, usize, f64)>,
    sys: usize,
    cons: Option<usize>,
    rhs: Option<usize>,
    x_ch: Vec<usize>,
    z_ch: Vec<usize>,
    cfg: &'a AmenConfig,
    telemetry: Vec<LocalSolveInfo>,
    sweep: usize,
}

impl<'a> Sweeper<'a> {
    fn new(system: &'a AmenSystem, variant: &Variant<'a>, x0: TTTensor, cfg: &'a AmenConfig) -> Result<Self> {
        let modes = x0.modes();
        let d = modes.len();
        let mut ws = Workspace::new(system, d);
        ws.tensors[X] = Some(x0.orthogonalize(0));
        let rho = cfg.enrichment_rank;
        if rho > 0 {
            ws.tensors[Z] = Some(random_basis(&modes, rho, cfg.seed)?);
        }
        let constrained = matches!(variant, Variant::Constrained);
        match variant {
            Variant::Constrained => ws.tensors[ONES] = Some(TTTensor::ones(&modes)?),
            Variant::Normal(b) => ws.tensors[RHS] = Some((*b).clone()),
        }
        let sys = ws.channel(X, OP_ATA, X);
        let cons = constrained.then(|| ws.channel(X, OP_I, ONES));
        let rhs = (!constrained).then(|| ws.channel(X, OP_AT, RHS));
        let terms = target_terms(variant);
        let (mut x_ch, mut z_ch) = (Vec::new(), Vec::new());
        if rho > 0 {
            for &(op, v, _) in &terms {
                x_ch.push(ws.channel(X, op, v));
                z_ch.push(ws.channel(Z, op, v));
            }
        }
        for k in (1..d).rev() {
            ws.update_all_right(k);
        }
        Ok(Self { ws, constrained, terms, sys, cons, rhs, x_ch, z_ch, cfg, telemetry: Vec::new(), sweep: 0 })
    }

    fn x(&self) -> &TTTensor {
        self.ws.t(X)
    }

    fn reduced(&self, k: usize) -> ReducedProblem {
        let ch = &self.ws.channels[self.sys];
        let map = ReducedMap::new(ch.left[k].clone(), self.ws.ops[OP_ATA].core(k).clone(), ch.right[k + 1].clone());
        let extra = usize::from(self.constrained);
        let dense_limit = self.cfg.local_direct_threshold.saturating_sub(extra);
        let mut rp = ReducedProblem::new(k, map, self.x().core(k).data().to_vec(), dense_limit);
        if let Some(c) = self.cons {
            let ch = &self.ws.channels[c];
            rp.e_tilde = Some(local_apply(&ch.left[k], self.ws.ops[OP_I].core(k), self.ws.t(ONES).core(k), &ch.right[k + 1]));
        }
        if let Some(c) = self.rhs {
            let ch = &self.ws.channels[c];
            rp.rhs = Some(local_apply(&ch.left[k], self.ws.ops[OP_AT].core(k), self.ws.t(RHS).core(k), &ch.right[k + 1]));
        }
        rp
    }

    fn solve(&mut self, k: usize) -> Result<Vec<f64>> {
        let rp = self.reduced(k);
        let local = self.cfg.local();
        let sol = if self.constrained { solve_local_constrained(&rp, &local)? } else { solve_local_normal(&rp, &local)? };
        let mg = rp.map.apply_vec(&sol.g);
        let objective = dot(&sol.g, &mg).max(0.0).sqrt();
        self.telemetry.push(LocalSolveInfo {
            sweep: self.sweep,
            core: k,
            dim: rp.dim,
            direct: sol.direct,
            condition: sol.condition,
            iterations: sol.iterations,
            converged: sol.converged,
            objective,
        });
        Ok(sol.g)
    }

    fn forward_step(&mut self, k: usize) -> Result<()> {
        let g = self.solve(k)?;
        let (l, n, r) = {
            let c = self.x().core(k);
            (c.left(), c.mode(), c.right())
        };
        let svd = svd_thin(l * n, r, &g);
        let tol = self.cfg.truncation.tolerance_for(norm2(&g));
        let (keep, _) = choose_rank(&svd.s, tol, self.cfg.truncation.max_rank);
        let u = truncated_left(&svd.u, svd.p, l * n, keep);
        let mut sv = svd.vt[..keep * r].to_vec();
        for (p, s) in svd.s.iter().take(keep).enumerate() {
            sv[p * r..(p + 1) * r].iter_mut().for_each(|v| *v *= s);
        }
        let g_trunc = matmul(&u, false, &sv, false, l * n, keep, r);
        self.ws.t_mut(X).set_core(k, Core::from_parts(l, n, r, g_trunc))?;

        let (xk, carry, q_cols) = if self.cfg.enrichment_rank > 0 {
            let e = self.ws.project(&self.terms, &self.x_ch, &self.z_ch, k);
            let zk = self.ws.project(&self.terms, &self.z_ch, &self.z_ch, k);
            let rz = self.ws.t(Z).core(k).right();
            self.update_z_forward(k, zk)?;
            // [U | E] -> Q R, carry R[:, :keep] * SV into the next core
            let cols = keep + rz;
            let mut aug = vec![0.0; l * n * cols];
            for row in 0..l * n {
                aug[row * cols..row * cols + keep].copy_from_slice(&u[row * keep..(row + 1) * keep]);
                aug[row * cols + keep..(row + 1) * cols].copy_from_slice(&e[row * rz..(row + 1) * rz]);
            }
            let (q, rr, qc) = qr_thin(l * n, cols, &aug);
            let mut rk = vec![0.0; qc * keep];
            for i in 0..qc {
                rk[i * keep..(i + 1) * keep].copy_from_slice(&rr[i * cols..i * cols + keep]);
            }
            (q, matmul(&rk, false, &sv, false, qc, keep, r), qc)
        } else {
            (u, sv, keep)
        };
        let next = mul_left(&carry, q_cols, self.x().core(k + 1));
        let x = self.ws.t_mut(X);
        x.set_pair(k, Core::from_parts(l, n, q_cols, xk), next);
        let d = x.d();
        x.set_orth_tags(k + 1, d - 2 - k);
        self.ws.update_all_left(k);
        Ok(())
    }

    fn backward_step(&mut self, k: usize) -> Result<()> {
        let g = self.solve(k)?;
        let (l, n, r) = {
            let c = self.x().core(k);
            (c.left(), c.mode(), c.right())
        };
        let svd = svd_thin(l, n * r, &g);
        let tol = self.cfg.truncation.tolerance_for(norm2(&g));
        let (keep, _) = choose_rank(&svd.s, tol, self.cfg.truncation.max_rank);
        let mut us = truncated_left(&svd.u, svd.p, l, keep);
        for row in 0..l {
            for (p, s) in svd.s.iter().take(keep).enumerate() {
                us[row * keep + p] *= s;
            }
        }
        let vt = svd.vt[..keep * n * r].to_vec();
        let g_trunc = matmul(&us, false, &vt, false, l, keep, n * r);
        self.ws.t_mut(X).set_core(k, Core::from_parts(l, n, r, g_trunc))?;

        let (xk, carry, q_rows) = if self.cfg.enrichment_rank > 0 {
            let e = self.ws.project(&self.terms, &self.z_ch, &self.x_ch, k);
            let zk = self.ws.project(&self.terms, &self.z_ch, &self.z_ch, k);
            let rz = self.ws.t(Z).core(k).left();
            self.update_z_backward(k, zk)?;
            let rows = keep + rz;
            let mut w = vt.clone();
            w.extend_from_slice(&e);
            let (lf, q, qr) = lq_thin(rows, n * r, &w);
            // US * L[:keep, :]
            let carry = matmul(&us, false, &lf[..keep * qr], false, l, keep, qr);
            (q, carry, qr)
        } else {
            (vt, us, keep)
        };
        let prev = mul_right(self.x().core(k - 1), &carry, q_rows);
        let x = self.ws.t_mut(X);
        x.set_pair(k - 1, prev, Core::from_parts(q_rows, n, r, xk));
        let d = x.d();
        x.set_orth_tags(k - 1, d - k);
        self.ws.update_all_right(k);
        Ok(())
    }

    fn update_z_forward(&mut self, k: usize, zk: Vec<f64>) -> Result<()> {
        let z = self.ws.t(Z);
        let (l, n, r) = (z.core(k).left(), z.core(k).mode(), z.core(k).right());
        let svd = svd_thin(l * n, r, &zk);
        let keep = self.cfg.enrichment_rank.min(svd.p).max(1);
        let u = truncated_left(&svd.u, svd.p, l * n, keep);
        let mut sv = svd.vt[..keep * r].to_vec();
        for (p, s) in svd.s.iter().take(keep).enumerate() {
            sv[p * r..(p + 1) * r].iter_mut().for_each(|v| *v *= s);
        }
        let next = mul_left(&sv, keep, z.core(k + 1));
        self.ws.t_mut(Z).set_pair(k, Core::from_parts(l, n, keep, u), next);
        Ok(())
    }

    fn update_z_backward(&mut self, k: usize, zk: Vec<f64>) -> Result<()> {
        let z = self.ws.t(Z);
        let (l, n, r) = (z.core(k).left(), z.core(k).mode(), z.core(k).right());
        let svd = svd_thin(l, n * r, &zk);
        let keep = self.cfg.enrichment_rank.min(svd.p).max(1);
        let mut us = truncated_left(&svd.u, svd.p, l, keep);
        for row in 0..l {
            for (p, s) in svd.s.iter().take(keep).enumerate() {
                us[row * keep + p] *= s;
            }
        }
        let prev = mul_right(z.core(k - 1), &us, keep);
        let vt = svd.vt[..keep * n * r].to_vec();
        self.ws.t_mut(Z).set_pair(k - 1, prev, Core::from_parts(keep, n, r, vt));
        Ok(())
    }

    /// One forward and one backward pass. Returns false if the deadline hit.
    fn sweep(&mut self) -> Result<bool> {
        let d = self.ws.d;
        for k in 0..d - 1 {
            if past(self.cfg.deadline) {
                return Ok(false);
            }
            self.forward_step(k)?;
        }
        for k in (1..d).rev() {
            if past(self.cfg.deadline) {
                return Ok(false);
            }
            self.backward_step(k)?;
        }
        self.sweep += 1;
        Ok(true)
    }

    /// Scales the center (core 0) so the entries sum to one.
    fn renormalize(&mut self) {
        let s = self.x().sum();
        if s != 0.0 && s.is_finite() {
            let x = self.ws.t_mut(X);
            let (lo, ro) = (x.left_orth(), x.right_orth());
            x.core_mut(0).data_mut().iter_mut().for_each(|v| *v /= s);
            x.set_orth_tags(lo, ro);
        }
    }
}

fn past(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|t| Instant::now() >= t)
}

/// Residual norm reported by the solver for the given variant.
fn residual(system: &AmenSystem, variant: &Variant, x: &TTTensor) -> Result<f64> {
    match variant {
        Variant::Constrained => Ok(system.a.apply(x)?.norm()),
        Variant::Normal(b) => Ok(b.sub(&system.a.apply(x)?)?.norm()),
    }
}

/// AMEn for a prepared system. `x0` defaults to the uniform distribution
/// (constrained) or to `b` (normal equations).
pub fn amen_solve_system(
    system: &AmenSystem,
    variant: Variant,
    cfg: &AmenConfig,
    x0: Option<&TTTensor>,
) -> Result<(TTTensor, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let a = &system.a;
    let modes = a.modes();
    let d = modes.len();
    if d < 2 {
        return Err(Error::InvalidArgument("AMEn needs at least two modes".into()));
    }
    if let Variant::Normal(b) = &variant {
        if b.modes() != modes {
            return Err(Error::DimensionMismatch("right-hand side modes differ from the operator".into()));
        }
    }
    let n_total: f64 = modes.iter().map(|&n| n as f64).product();
    let x0 = match (x0, &variant) {
        (Some(x), _) => {
            if x.modes() != modes {
                return Err(Error::DimensionMismatch("initial guess modes differ from the operator".into()));
            }
            x.clone()
        }
        (None, Variant::Constrained) => TTTensor::constant(&modes, 1.0 / n_total)?,
        (None, Variant::Normal(b)) => b.truncate(&TruncationPolicy::relative(1e-2, 4)),
    };
    let (method, reference) = match &variant {
        Variant::Constrained => ("amen", a.apply(&TTTensor::constant(&modes, 1.0 / n_total)?)?.norm()),
        Variant::Normal(b) => ("amen-normal", b.norm()),
    };
    let mut report = SolveReport::new(method, cfg.residual_target, reference);

    // zero right-hand side: the minimal-norm answer is zero
    if let Variant::Normal(b) = &variant {
        if b.norm() == 0.0 {
            report.status = SolveStatus::Converged;
            report.push(0.0, 1, start.elapsed().as_secs_f64());
            report.wall_seconds = start.elapsed().as_secs_f64();
            return Ok((TTTensor::zeros(&modes)?, report));
        }
    }

    let mut sw = Sweeper::new(system, &variant, x0, cfg)?;
    let mut best: Option<(f64, TTTensor)> = None;
    report.status = SolveStatus::MaxIterations;
    for s in 0..cfg.max_sweeps {
        let finished = sw.sweep()?;
        if sw.constrained {
            sw.renormalize();
        }
        let res = residual(system, &variant, sw.x())?;
        report.push(res, sw.x().max_rank(), start.elapsed().as_secs_f64());
        debug!("{method} sweep {}: residual {res:.3e}, max rank {}", s + 1, sw.x().max_rank());
        if best.as_ref().is_none_or(|(r, _)| res < *r || !r.is_finite()) {
            best = Some((res, sw.x().clone()));
        }
        if !res.is_finite() {
            report.status = SolveStatus::Failed;
            report.notes.push("residual became non-finite".into());
            break;
        }
        if res <= cfg.residual_target {
            report.status = SolveStatus::Converged;
            break;
        }
        if !finished || past(cfg.deadline) {
            report.status = SolveStatus::Timeout;
            break;
        }
    }
    report.local_solves = std::mem::take(&mut sw.telemetry);
    report.wall_seconds = start.elapsed().as_secs_f64();
    info!(
        "{method}: {:?} after {} sweeps, residual {:.3e}, max rank {}",
        report.status,
        report.iterations,
        report.final_residual().unwrap_or(f64::NAN),
        report.max_rank()
    );
    let x = match (report.status, best) {
        (SolveStatus::Converged, _) | (_, None) => sw.ws.tensors[X].take().expect("iterate"),
        (_, Some((_, b))) => b,
    };
    Ok((x, report))
}

/// AMEn on `A x = 0, sum(x) = 1` (constrained) or on the normal equations
/// of `A x = b`.
pub fn amen_solve(a: &TTOperator, variant: Variant, cfg: &AmenConfig, x0: Option<&TTTensor>) -> Result<(TTTensor, SolveReport)> {
    let system = AmenSystem::new(a)?;
    amen_solve_system(&system, variant, cfg, x0)
}

/// Constrained AMEn for the stationary vector of `A`, stopping once
/// `||A x|| <= 10^-tol_orders * ||A u||` with `u` the uniform distribution.
/// Core rounding uses the absolute accuracy `0.1 * target / ||A||_2` and the
/// rank cap of `base`.
pub fn amen_stationary(a: &TTOperator, tol_orders: f64, base: &AmenConfig) -> Result<(TTTensor, SolveReport)> {
    if !(tol_orders > 0.0) {
        return Err(Error::Config(format!("tolerance orders must be positive, got {tol_orders}")));
    }
    let modes = a.modes();
    let n: f64 = modes.iter().map(|&m| m as f64).product();
    let reference = a.apply(&TTTensor::constant(&modes, 1.0 / n)?)?.norm();
    let target = 10f64.powf(-tol_orders) * reference;
    let norm = spectral_norm_estimate(a, 20, base.seed)?;
    let mut cfg = base.clone();
    cfg.residual_target = target;
    cfg.truncation.abs_tol = if norm > 0.0 { 0.1 * target / norm } else { 0.0 };
    cfg.truncation.rel_tol = 0.0;
    amen_solve(a, Variant::Constrained, &cfg, None)
}

/// Rank-`rank` TT approximation of `-A x` (no `rhs`) or of `A^T (b - A x)`,
/// fitted by two ALS sweeps from a seeded random start.
pub fn approx_residual(a: &TTOperator, x: &TTTensor, rhs: Option<&TTTensor>, rank: usize, seed: u64) -> Result<TTTensor> {
    if rank == 0 {
        return Err(Error::InvalidArgument("residual rank must be >= 1".into()));
    }
    if a.modes() != x.modes() {
        return Err(Error::DimensionMismatch("operator and tensor modes differ".into()));
    }
    let system = AmenSystem::new(a)?;
    let modes = x.modes();
    let d = modes.len();
    let variant = match rhs {
        None => Variant::Constrained,
        Some(b) => Variant::Normal(b),
    };
    let terms = target_terms(&variant);
    let mut ws = Workspace::new(&system, d);
    ws.tensors[X] = Some(x.clone());
    ws.tensors[Z] = Some(random_basis(&modes, rank, seed)?);
    if let Some(b) = rhs {
        ws.tensors[RHS] = Some(b.clone());
    }
    let chans: Vec<usize> = terms.iter().map(|&(op, v, _)| ws.channel(Z, op, v)).collect();
    if d == 1 {
        let z = ws.project(&terms, &chans, &chans, 0);
        return TTTensor::from_cores(vec![Core::from_parts(1, modes[0], 1, z)]);
    }
    for k in (1..d).rev() {
        ws.update_all_right(k);
    }
    for _ in 0..2 {
        for k in 0..d - 1 {
            let zk = ws.project(&terms, &chans, &chans, k);
            let c = ws.t(Z).core(k);
            let (l, n, r) = (c.left(), c.mode(), c.right());
            let (q, rr, qc) = qr_thin(l * n, r, &zk);
            let next = mul_left(&rr, qc, ws.t(Z).core(k + 1));
            ws.t_mut(Z).set_pair(k, Core::from_parts(l, n, qc, q), next);
            ws.update_all_left(k);
        }
        for k in (1..d).rev() {
            let zk = ws.project(&terms, &chans, &chans, k);
            let c = ws.t(Z).core(k);
            let (l, n, r) = (c.left(), c.mode(), c.right());
            let (lf, q, qr) = lq_thin(l, n * r, &zk);
            let prev = mul_right(ws.t(Z).core(k - 1), &lf, qr);
            ws.t_mut(Z).set_pair(k - 1, prev, Core::from_parts(qr, n, r, q));
            ws.update_all_right(k);
        }
    }
    let z0 = ws.project(&terms, &chans, &chans, 0);
    let mut z = ws.tensors[Z].take().expect("residual slot");
    let c = z.core(0);
    let core = Core::from_parts(1, c.mode(), c.right(), z0);
    z.set_core(0, core)?;
    z.set_orth_tags(0, d - 1);
    Ok(z)
}

/// Augments core `k` of `x` by (at most) `rank` directions of `z` projected
/// onto the interfaces of `x` left of `k` and of `z` right of `k`; core
/// `k + 1` is zero-padded so the represented tensor is unchanged.
pub fn enrich(x: &TTTensor, k: usize, z: &TTTensor, rank: usize) -> Result<TTTensor> {
    let d = x.d();
    if k + 1 >= d {
        return Err(Error::InvalidArgument(format!("enrichment needs 0 <= k < d - 1, got k = {k}, d = {d}")));
    }
    if x.modes() != z.modes() {
        return Err(Error::DimensionMismatch("enrichment direction has different modes".into()));
    }
    let mut x = x.orthogonalize(k);
    let z = z.orthogonalize(k);
    let ident = TTOperator::identity(&x.modes())?;
    let mut phi = Frame::unit();
    for j in 0..k {
        phi = frame_left(&phi, x.core(j), ident.core(j), z.core(j));
    }
    // z is right-orthogonal after k, so its right frame is the identity
    let rz = z.core(k).right();
    let psi = Frame { ry: rz, ro: 1, rx: rz, data: crate::numkit::DenseMatrix::identity(rz).into_vec() };
    let e = local_apply(&phi, ident.core(k), z.core(k), &psi);
    let c = x.core(k);
    let (l, n, r) = (c.left(), c.mode(), c.right());
    // keep the dominant `rank` directions of E
    let svd = svd_thin(l * n, rz, &e);
    let m = rank.min(svd.p);
    let mut e_cols = truncated_left(&svd.u, svd.p, l * n, m);
    for row in 0..l * n {
        for (p, s) in svd.s.iter().take(m).enumerate() {
            e_cols[row * m + p] *= s;
        }
    }
    let cols = r + m;
    let mut aug = vec![0.0; l * n * cols];
    for row in 0..l * n {
        aug[row * cols..row * cols + r].copy_from_slice(&c.data()[row * r..(row + 1) * r]);
        aug[row * cols + r..(row + 1) * cols].copy_from_slice(&e_cols[row * m..(row + 1) * m]);
    }
    let (q, rr, qc) = qr_thin(l * n, cols, &aug);
    // padded next core [G_{k+1}; 0] premultiplied by R
    let mut rk = vec![0.0; qc * r];
    for i in 0..qc {
        rk[i * r..(i + 1) * r].copy_from_slice(&rr[i * cols..i * cols + r]);
    }
    let next = mul_left(&rk, qc, x.core(k + 1));
    x.set_pair(k, Core::from_parts(l, n, qc, q), next);
    x.set_orth_tags(k + 1, d - 2 - k);
    Ok(x)
}

/// Power-iteration estimate of `||A||_2` in TT arithmetic.
pub fn spectral_norm_estimate(a: &TTOperator, iters: usize, seed: u64) -> Result<f64> {
    let modes = a.modes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = TTTensor::random(&modes, &feasible_ranks(&modes, 2), &mut rng)?;
    let at = a.transpose();
    let policy = TruncationPolicy::relative(1e-3, 8);
    let mut est = 0.0;
    for _ in 0..iters.max(1) {
        let nx = x.norm();
        if nx == 0.0 {
            return Ok(0.0);
        }
        x = x.scale(1.0 / nx);
        let ax = a.apply(&x)?.truncate(&policy);
        est = ax.norm();
        x = at.apply(&ax)?.truncate(&policy);
    }
    Ok(est)
}
