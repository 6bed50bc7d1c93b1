use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::blas::{axpy, dot, norm2};
use super::DenseMatrix;

/// A square linear operator available only through matrix-vector products.
pub trait LinearMap: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`; `y` arrives with arbitrary contents and must be overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl LinearMap for DenseMatrix {
    fn dim(&self) -> usize {
        assert!(self.is_square(), "only square matrices act as linear maps");
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }
}

/// Outcome of an iterative solve. Failures are reported, never panicked.
#[derive(Clone, Debug)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True residual `||b - A x||` of the returned iterate.
    pub residual_norm: f64,
    pub converged: bool,
    /// Residual norm after each iteration (index 0 is the initial residual).
    pub history: Vec<f64>,
    pub breakdown: Option<String>,
}

fn true_residual(map: &dyn LinearMap, x: &[f64], b: &[f64]) -> f64 {
    let ax = map.apply_vec(x);
    norm2(&ax.iter().zip(b).map(|(p, q)| q - p).collect::<Vec<_>>())
}

/// Probes `<u, A v> = <A u, v>` on three random pairs.
pub(crate) fn symmetry_defect(map: &dyn LinearMap) -> f64 {
    let n = map.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let au = map.apply_vec(&u);
        let av = map.apply_vec(&v);
        let lhs = dot(&u, &av);
        let rhs = dot(&au, &v);
        let scale = norm2(&u) * norm2(&av) + norm2(&au) * norm2(&v);
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    worst
}

/// Unpreconditioned MINRES for symmetric (possibly indefinite or singular)
/// systems. Returns the last iterate, which has the smallest residual over
/// the Krylov space generated so far.
pub fn minres(map: &dyn LinearMap, b: &[f64], x0: Option<&[f64]>, tol: f64, maxit: usize) -> KrylovOutcome {
    let n = map.dim();
    assert_eq!(b.len(), n, "rhs length must equal the map dimension");
    debug_assert!(symmetry_defect(map) <= 1e-8, "minres requires a symmetric map");

    let bnorm = norm2(b);
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    if bnorm == 0.0 {
        return KrylovOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual_norm: 0.0,
            converged: true,
            history: vec![0.0],
            breakdown: None,
        };
    }
    let mut r1: Vec<f64> = {
        let ax = map.apply_vec(&x);
        b.iter().zip(&ax).map(|(p, q)| p - q).collect()
    };
    let beta1 = norm2(&r1);
    let mut history = vec![beta1];
    if beta1 <= tol * bnorm {
        return KrylovOutcome { x, iterations: 0, residual_norm: beta1, converged: true, history, breakdown: None };
    }

    let eps = f64::EPSILON;
    let mut r2 = r1.clone();
    let mut y = r1.clone();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let (mut oldb, mut beta, mut dbar, mut epsln) = (0.0, beta1, 0.0, 0.0);
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut breakdown = None;
    let mut iterations = 0;

    for itn in 1..=maxit {
        iterations = itn;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        map.apply(&v, &mut y);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm2(&r2);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(eps);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);

        if !phibar.is_finite() || x.iter().any(|v| !v.is_finite()) {
            breakdown = Some("non-finite value in MINRES recurrence".into());
            break;
        }
        history.push(phibar);
        if phibar <= tol * bnorm {
            break;
        }
        if beta <= eps * beta1 {
            // invariant Krylov subspace reached
            break;
        }
    }

    if breakdown.is_some() {
        // the best finite iterate we can vouch for is the starting point
        x = match x0 {
            Some(v) => v.to_vec(),
            None => vec![0.0; n],
        };
    }
    let residual_norm = true_residual(map, &x, b);
    let converged = breakdown.is_none() && residual_norm <= tol * bnorm;
    KrylovOutcome { x, iterations, residual_norm, converged, history, breakdown }
}

/// Non-restarted GMRES with modified Gram-Schmidt Arnoldi, `steps` iterations
/// from `x0`. Stops early on a lucky breakdown.
pub fn gmres_dense(map: &dyn LinearMap, b: &[f64], x0: &[f64], steps: usize) -> KrylovOutcome {
    let n = map.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x0.len(), n);
    let steps = steps.max(1);
    let r0: Vec<f64> = {
        let ax = map.apply_vec(x0);
        b.iter().zip(&ax).map(|(p, q)| p - q).collect()
    };
    let beta = norm2(&r0);
    let mut history = vec![beta];
    let bnorm = norm2(b);
    if beta == 0.0 || beta <= 1e-15 * bnorm {
        return KrylovOutcome {
            x: x0.to_vec(),
            iterations: 0,
            residual_norm: beta,
            converged: true,
            history,
            breakdown: None,
        };
    }
    let mut basis: Vec<Vec<f64>> = vec![r0.iter().map(|v| v / beta).collect()];
    let mut h = DMatrix::<f64>::zeros(steps + 1, steps);
    let mut used = 0;
    let mut best = 0;
    for j in 0..steps {
        let mut w = map.apply_vec(&basis[j]);
        for (i, vi) in basis.iter().enumerate() {
            let hij = dot(&w, vi);
            h[(i, j)] = hij;
            axpy(-hij, vi, &mut w);
        }
        let hn = norm2(&w);
        h[(j + 1, j)] = hn;
        used = j + 1;
        let lucky = hn <= 1e-14 * beta;
        if !lucky {
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let res = hessenberg_lsq(&h, used, beta).1;
        // once the projected residual hits round-off, further Arnoldi vectors are noise
        if res < *history.last().expect("non-empty") {
            best = used;
        }
        history.push(res.min(*history.last().expect("non-empty")));
        if lucky || res <= 1e-14 * beta {
            break;
        }
    }
    let y = if best == 0 { Vec::new() } else { hessenberg_lsq(&h, best, beta).0 };
    let mut x = x0.to_vec();
    for (yi, vi) in y.iter().zip(&basis) {
        axpy(*yi, vi, &mut x);
    }
    let residual_norm = true_residual(map, &x, b);
    KrylovOutcome { x, iterations: used, residual_norm, converged: false, history, breakdown: None }
}

/// Solves `min || beta e1 - H_k y ||` for the leading `(k+1) x k` block.
pub(crate) fn hessenberg_lsq(h: &DMatrix<f64>, k: usize, beta: f64) -> (Vec<f64>, f64) {
    let hk = h.view((0, 0), (k + 1, k)).into_owned();
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[0] = beta;
    let svd = hk.clone().svd(true, true);
    let y = svd.solve(&rhs, 1e-14 * svd.singular_values.max()).map(|v| v.as_slice().to_vec());
    let y = y.unwrap_or_else(|_| vec![0.0; k]);
    let res = &rhs - &hk * DVector::from_column_slice(&y);
    (y, res.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::lstsq_min_norm;

    fn laplacian(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn minres_zero_rhs_gives_zero() {
        let a = laplacian(5);
        let out = minres(&a, &[0.0; 5], None, 1e-10, 100);
        assert_eq!(out.iterations, 0);
        assert!(out.x.iter().all(|v| *v == 0.0));
        assert!(out.converged);
    }

    #[test]
    fn minres_spd_diagonal_terminates() {
        let d: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let a = DenseMatrix::diag(&d);
        let b = vec![1.0; 10];
        let out = minres(&a, &b, None, 1e-10, 50);
        assert!(out.converged, "{out:?}");
        assert!(out.iterations <= 10);
        for (i, xi) in out.x.iter().enumerate() {
            assert!((xi - 1.0 / d[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn minres_singular_consistent_system() {
        // periodic Laplacian: kernel is the constant vector
        let n = 8;
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if (i + 1) % n == j || (j + 1) % n == i {
                -1.0
            } else {
                0.0
            }
        });
        let b: Vec<f64> = (0..n).map(|i| (i as f64) - 3.5).collect(); // orthogonal to ones
        let out = minres(&a, &b, None, 1e-10, 100);
        assert!(out.converged, "{out:?}");
        let oracle = lstsq_min_norm(&a, &b).unwrap();
        // started from zero, so MINRES stays in range(A) and finds the min-norm solution
        for (p, q) in out.x.iter().zip(&oracle) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn minres_history_non_increasing() {
        let a = laplacian(30);
        let b: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let out = minres(&a, &b, None, 1e-12, 200);
        for w in out.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn minres_indefinite_saddle() {
        // [[2, 1], [1, 0]] x = [0, 1] -> x = [1, -2]
        let a = DenseMatrix::from_row_major(2, 2, vec![2.0, 1.0, 1.0, 0.0]).unwrap();
        let out = minres(&a, &[0.0, 1.0], None, 1e-12, 10);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-10 && (out.x[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn gmres_exact_start_is_fixed_point() {
        let a = laplacian(6);
        let x: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let b = a.apply_vec(&x);
        let out = gmres_dense(&a, &b, &x, 3);
        assert_eq!(out.x, x);
    }

    #[test]
    fn gmres_three_steps_reduce_tridiagonal_residual() {
        let a = DenseMatrix::from_fn(10, 10, |i, j| match (i as i64 - j as i64).abs() {
            0 => 3.0,
            1 if i > j => -1.0,
            1 => -1.5,
            _ => 0.0,
        });
        let b = vec![1.0; 10];
        let x0 = vec![0.0; 10];
        let out = gmres_dense(&a, &b, &x0, 3);
        assert!(out.residual_norm < norm2(&b));
        for w in out.history.windows(2) {
            assert!(w[1] <= w[0] + 1e-14);
        }
        // history tracks the true residual
        assert!((out.history.last().unwrap() - out.residual_norm).abs() < 1e-10);
    }

    #[test]
    fn gmres_full_dimension_solves() {
        let n = 12;
        let a = DenseMatrix::from_fn(n, n, |i, j| if i == j { 4.0 } else { 1.0 / (1.0 + (i + 2 * j) as f64) });
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let out = gmres_dense(&a, &b, &vec![0.0; n], n);
        assert!(out.residual_norm <= 1e-10 * norm2(&b));
    }

    #[test]
    fn gmres_beats_explicit_polynomial_iterates() {
        // Richardson with step 1/4 is a degree-k polynomial iterate in the same Krylov space
        let n = 15;
        let a = laplacian(n);
        let b: Vec<f64> = (0..n).map(|i| ((i * 3) % 5) as f64).collect();
        let x0 = vec![0.0; n];
        for k in 1..6 {
            let out = gmres_dense(&a, &b, &x0, k);
            let mut x = x0.clone();
            for _ in 0..k {
                let ax = a.apply_vec(&x);
                for i in 0..n {
                    x[i] += 0.25 * (b[i] - ax[i]);
                }
            }
            assert!(out.residual_norm <= true_residual(&a, &x, &b) + 1e-12);
        }
    }
}
