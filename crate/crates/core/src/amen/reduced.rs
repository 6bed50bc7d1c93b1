//! Local (reduced) problems of one core update.

use super::frames::{frame_left, frame_right, local_apply, Frame};
use crate::error::{Error, Result};
use crate::numkit::blas::{dot, norm2};
use crate::numkit::{lstsq_min_norm, minres, DenseMatrix, LinearMap};
use crate::tt::{Core, OpCore, TTOperator, TTTensor};

/// `g -> G_{!=k}^T B G_{!=k} g` through the interface frames of `B`.
#[derive(Clone, Debug)]
pub struct ReducedMap {
    pub(crate) phi: Frame,
    pub(crate) op: OpCore,
    pub(crate) psi: Frame,
    shape: (usize, usize, usize),
}

impl ReducedMap {
    pub(crate) fn new(phi: Frame, op: OpCore, psi: Frame) -> Self {
        let shape = (phi.ry, op.rows(), psi.ry);
        Self { phi, op, psi, shape }
    }

    /// Core shape `(r_{k-1}, n_k, r_k)` of the unknown.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        // symmetrize away round-off
        DenseMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }
}

impl LinearMap for ReducedMap {
    fn dim(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (l, n, r) = self.shape;
        let core = Core::from_parts(l, n, r, x.to_vec());
        y.copy_from_slice(&local_apply(&self.phi, &self.op, &core, &self.psi));
    }
}

/// Symmetric indefinite saddle matrix `[M e; e^T 0]`.
struct SaddleMap<'a> {
    map: &'a ReducedMap,
    e: &'a [f64],
}

impl LinearMap for SaddleMap<'_> {
    fn dim(&self) -> usize {
        self.e.len() + 1
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.e.len();
        self.map.apply(&x[..n], &mut y[..n]);
        for (yi, ei) in y[..n].iter_mut().zip(self.e) {
            *yi += ei * x[n];
        }
        y[n] = dot(self.e, &x[..n]);
    }
}

/// The local problem at core `k`.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    pub k: usize,
    pub dim: usize,
    pub map: ReducedMap,
    /// Projected all-ones vector `G_{!=k}^T 1`.
    pub e_tilde: Option<Vec<f64>>,
    /// Projected right-hand side `G_{!=k}^T A^T b`.
    pub rhs: Option<Vec<f64>>,
    /// Explicit reduced matrix, present for small `dim`.
    pub dense: Option<DenseMatrix>,
    /// Current core, used as the iterative warm start.
    pub current: Vec<f64>,
}

impl ReducedProblem {
    pub(crate) fn new(k: usize, map: ReducedMap, current: Vec<f64>, dense_threshold: usize) -> Self {
        let dim = map.dim();
        let dense = (dim <= dense_threshold).then(|| map.to_dense());
        Self { k, dim, map, e_tilde: None, rhs: None, dense, current }
    }
}

/// Builds the local problem at core `k` from scratch. `X` must be
/// left-orthogonal before `k` and right-orthogonal after it.
pub fn build_reduced(a: &TTOperator, x: &TTTensor, k: usize, rhs: Option<&TTTensor>) -> Result<ReducedProblem> {
    let d = x.d();
    if k >= d {
        return Err(Error::InvalidArgument(format!("core index {k} out of range for d = {d}")));
    }
    if a.modes() != x.modes() {
        return Err(Error::DimensionMismatch("operator and tensor modes differ".into()));
    }
    if x.left_orth() < k || x.right_orth() < d - 1 - k {
        return Err(Error::NotOrthogonal(format!(
            "core {k} needs {k} left- and {} right-orthogonal cores, tensor has {} and {}",
            d - 1 - k,
            x.left_orth(),
            x.right_orth()
        )));
    }
    let b = a.transpose().compose(a)?.compress(1e-14);
    let ident = TTOperator::identity(&x.modes())?;
    let ones = TTTensor::ones(&x.modes())?;
    let frames = |op: &TTOperator, v: &TTTensor| {
        let mut phi = Frame::unit();
        for j in 0..k {
            phi = frame_left(&phi, x.core(j), op.core(j), v.core(j));
        }
        let mut psi = Frame::unit();
        for j in (k + 1..d).rev() {
            psi = frame_right(&psi, x.core(j), op.core(j), v.core(j));
        }
        (phi, psi)
    };
    let (phi, psi) = frames(&b, x);
    let map = ReducedMap::new(phi, b.core(k).clone(), psi);
    let mut rp = ReducedProblem::new(k, map, x.core(k).data().to_vec(), 1000);
    let (p1, s1) = frames(&ident, &ones);
    rp.e_tilde = Some(local_apply(&p1, ident.core(k), ones.core(k), &s1));
    if let Some(b_vec) = rhs {
        let at = a.transpose();
        let (pr, sr) = frames(&at, b_vec);
        rp.rhs = Some(local_apply(&pr, at.core(k), b_vec.core(k), &sr));
    }
    Ok(rp)
}

/// Settings of a local solve.
#[derive(Clone, Copy, Debug)]
pub struct LocalSolveConfig {
    /// Direct solve when the system size is at most this.
    pub direct_threshold: usize,
    pub iter_tol: f64,
    pub iter_maxit: usize,
}

impl Default for LocalSolveConfig {
    fn default() -> Self {
        Self { direct_threshold: 1000, iter_tol: 1e-10, iter_maxit: 2000 }
    }
}

#[derive(Clone, Debug)]
pub struct LocalSolution {
    pub g: Vec<f64>,
    /// Lagrange multiplier (constrained variant).
    pub lambda: Option<f64>,
    pub direct: bool,
    pub condition: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

fn direct_solve(m: &DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, Option<f64>)> {
    match crate::numkit::lu_solve_strict(m, b) {
        Ok(sol) => Ok((sol.x, Some(sol.pivot_ratio))),
        Err(Error::Singular(_)) => Ok((lstsq_min_norm(m, b)?, None)),
        Err(e) => Err(e),
    }
}

/// Solves `[M e; e^T 0] [g; lambda] = [0; 1]`.
pub fn solve_local_constrained(rp: &ReducedProblem, cfg: &LocalSolveConfig) -> Result<LocalSolution> {
    let e = rp
        .e_tilde
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("constrained solve needs the projected constraint".into()))?;
    if norm2(e) == 0.0 {
        return Err(Error::Singular("projected constraint vector is zero".into()));
    }
    let n = rp.dim;
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = 1.0;
    if n < cfg.direct_threshold {
        let m = match &rp.dense {
            Some(m) => m.clone(),
            None => rp.map.to_dense(),
        };
        let mut s = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] = m[(i, j)];
            }
            s[(i, n)] = e[i];
            s[(n, i)] = e[i];
        }
        let (sol, condition) = direct_solve(&s, &rhs)?;
        let residual = {
            let r = s.matvec(&sol)?;
            norm2(&r.iter().zip(&rhs).map(|(p, q)| p - q).collect::<Vec<_>>())
        };
        return Ok(LocalSolution {
            g: sol[..n].to_vec(),
            lambda: Some(sol[n]),
            direct: true,
            condition,
            iterations: 0,
            converged: residual.is_finite(),
            residual,
        });
    }
    let saddle = SaddleMap { map: &rp.map, e };
    // warm start: current core rescaled onto the constraint
    let mut x0 = rp.current.clone();
    let c = dot(e, &x0);
    if c.abs() > 1e-300 {
        x0.iter_mut().for_each(|v| *v /= c);
    } else {
        x0 = e.iter().map(|v| v / dot(e, e)).collect();
    }
    let mg = rp.map.apply_vec(&x0);
    x0.push(-dot(&x0, &mg));
    let out = minres(&saddle, &rhs, Some(&x0), cfg.iter_tol, cfg.iter_maxit);
    if out.breakdown.is_some() && !out.x.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular(format!("saddle MINRES broke down: {:?}", out.breakdown)));
    }
    Ok(LocalSolution {
        g: out.x[..n].to_vec(),
        lambda: Some(out.x[n]),
        direct: false,
        condition: None,
        iterations: out.iterations,
        converged: out.converged,
        residual: out.residual_norm,
    })
}

/// Solves `M g = G^T A^T b`, ignoring the normalization.
pub fn solve_local_normal(rp: &ReducedProblem, cfg: &LocalSolveConfig) -> Result<LocalSolution> {
    let rhs = rp
        .rhs
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("normal-equation solve needs a right-hand side".into()))?;
    let n = rp.dim;
    if norm2(rhs) == 0.0 {
        return Ok(LocalSolution {
            g: vec![0.0; n],
            lambda: None,
            direct: n <= cfg.direct_threshold,
            condition: None,
            iterations: 0,
            converged: true,
            residual: 0.0,
        });
    }
    if n <= cfg.direct_threshold {
        let m = match &rp.dense {
            Some(m) => m.clone(),
            None => rp.map.to_dense(),
        };
        let (g, condition) = direct_solve(&m, rhs)?;
        let r = m.matvec(&g)?;
        let residual = norm2(&r.iter().zip(rhs).map(|(p, q)| p - q).collect::<Vec<_>>());
        return Ok(LocalSolution { g, lambda: None, direct: true, condition, iterations: 0, converged: true, residual });
    }
    let out = minres(&rp.map, rhs, Some(&rp.current), cfg.iter_tol, cfg.iter_maxit);
    if !out.x.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular(format!("MINRES broke down: {:?}", out.breakdown)));
    }
    Ok(LocalSolution {
        g: out.x,
        lambda: None,
        direct: false,
        condition: None,
        iterations: out.iterations,
        converged: out.converged,
        residual: out.residual_norm,
    })
}
