use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numkit::hessenberg_lsq;
use crate::tt::{TTOperator, TTTensor, TruncationPolicy};

/// Residual `b - A x` with absent `b` or `x` read as zero.
pub(crate) fn residual(a: &TTOperator, b: Option<&TTTensor>, x: Option<&TTTensor>) -> Result<Option<TTTensor>> {
    Ok(match (b, x) {
        (Some(b), Some(x)) => Some(b.sub(&a.apply(x)?)?),
        (None, Some(x)) => Some(a.apply(x)?.scale(-1.0)),
        (Some(b), None) => Some(b.clone()),
        (None, None) => None,
    })
}

/// GMRES in TT arithmetic. Returns the iterate and the residual history:
/// the truncated initial residual followed by the least-squares residual
/// after each Arnoldi step.
pub(crate) fn gmres(
    a: &TTOperator,
    b: Option<&TTTensor>,
    x0: Option<&TTTensor>,
    steps: usize,
    trunc: &TruncationPolicy,
) -> Result<(TTTensor, Vec<f64>)> {
    let modes = a.modes();
    let Some(r0) = residual(a, b, x0)? else {
        return Ok((TTTensor::zeros(&modes)?, vec![0.0]));
    };
    let r0 = r0.truncate(trunc);
    let beta = r0.norm();
    let start = || x0.cloned().map_or_else(|| TTTensor::zeros(&modes), Ok);
    if beta == 0.0 || steps == 0 {
        return Ok((start()?, vec![beta]));
    }
    let mut basis = vec![r0.scale(1.0 / beta)];
    let mut h = DMatrix::<f64>::zeros(steps + 1, steps);
    let mut history = vec![beta];
    let mut used = 0;
    for j in 0..steps {
        let mut w = a.apply(&basis[j])?.truncate(trunc);
        for (i, v) in basis.iter().enumerate() {
            let hij = w.inner(v)?;
            h[(i, j)] = hij;
            w = w.sub(&v.scale(hij))?;
        }
        let w = w.truncate(trunc);
        let hn = w.norm();
        h[(j + 1, j)] = hn;
        used = j + 1;
        history.push(hessenberg_lsq(&h, used, beta).1);
        if hn <= 1e-14 * beta {
            break;
        }
        if j + 1 < steps {
            basis.push(w.scale(1.0 / hn));
        }
    }
    let (y, _) = hessenberg_lsq(&h, used, beta);
    let mut update: Option<TTTensor> = x0.cloned();
    for (yi, v) in y.iter().zip(&basis) {
        let term = v.scale(*yi);
        update = Some(match update {
            Some(u) => u.add(&term)?,
            None => term,
        });
    }
    let x = update.expect("at least one basis vector").truncate(trunc);
    Ok((x, history))
}

/// `steps` non-restarted GMRES iterations for `A x = b` from `x0`, with every
/// Krylov vector and the final iterate rounded under `trunc`.
pub fn tt_gmres_smooth(
    a: &TTOperator,
    b: &TTTensor,
    x0: &TTTensor,
    steps: usize,
    trunc: &TruncationPolicy,
) -> Result<TTTensor> {
    Ok(tt_gmres_smooth_with_history(a, b, x0, steps, trunc)?.0)
}

/// As [`tt_gmres_smooth`], also returning the residual estimate per step.
pub fn tt_gmres_smooth_with_history(
    a: &TTOperator,
    b: &TTTensor,
    x0: &TTTensor,
    steps: usize,
    trunc: &TruncationPolicy,
) -> Result<(TTTensor, Vec<f64>)> {
    if steps == 0 {
        return Err(Error::InvalidArgument("GMRES needs at least one step".into()));
    }
    if b.modes() != a.modes() || x0.modes() != a.modes() {
        return Err(Error::DimensionMismatch("operator, right-hand side and guess modes differ".into()));
    }
    trunc.validate()?;
    gmres(a, Some(b), Some(x0), steps, trunc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{gmres_dense, DenseMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy() -> (TTOperator, TTTensor, TTTensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f1 = DenseMatrix::from_fn(3, 3, |i, j| if i == j { 4.0 } else { (i + 2 * j) as f64 * 0.3 - 0.5 });
        let f2 = DenseMatrix::from_fn(4, 4, |i, j| if i == j { 3.0 } else { 0.2 * (i as f64 - j as f64) });
        let a = TTOperator::from_factors(&[f1, f2]).unwrap();
        let b = TTTensor::random(&[3, 4], &[2], &mut rng).unwrap();
        let x0 = TTTensor::random(&[3, 4], &[1], &mut rng).unwrap();
        (a, b, x0)
    }

    #[test]
    fn exact_guess_is_kept() {
        let (a, _, x0) = toy();
        let b = a.apply(&x0).unwrap();
        let x = tt_gmres_smooth(&a, &b, &x0, 3, &TruncationPolicy::exact()).unwrap();
        assert!(x.sub(&x0).unwrap().norm() < 1e-13);
    }

    #[test]
    fn matches_dense_gmres() {
        let (a, b, x0) = toy();
        let dense = a.to_dense().unwrap();
        let bd = b.to_dense().unwrap();
        let x0d = x0.to_dense().unwrap();
        for steps in [1, 3, 12] {
            let x = tt_gmres_smooth(&a, &b, &x0, steps, &TruncationPolicy::exact()).unwrap();
            let out = gmres_dense(&dense, &bd, &x0d, steps);
            let err = x.to_dense().unwrap().iter().zip(&out.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "steps {steps}: {err}");
        }
    }

    #[test]
    fn history_is_non_increasing() {
        let (a, b, x0) = toy();
        let (x, hist) = tt_gmres_smooth_with_history(&a, &b, &x0, 6, &TruncationPolicy::exact()).unwrap();
        assert!(hist.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let res = b.sub(&a.apply(&x).unwrap()).unwrap().norm();
        assert!((res - hist.last().unwrap()).abs() < 1e-10 * hist[0]);
    }

    #[test]
    fn zero_steps_rejected() {
        let (a, b, x0) = toy();
        assert!(tt_gmres_smooth(&a, &b, &x0, 0, &TruncationPolicy::exact()).is_err());
    }
}
