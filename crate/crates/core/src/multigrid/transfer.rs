//! Coarsening of a single mode and the one-dimensional transfer factors.

use log::debug;

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

/// Coarse size of a mode: `(n + 1) / 2` for odd `n`, `n / 2 + 1` for even `n`.
pub fn coarsen_size(n: usize) -> Result<usize> {
    if n <= 3 {
        return Err(Error::InvalidArgument(format!("mode size {n} is already coarsest")));
    }
    Ok(if n % 2 == 1 { n.div_ceil(2) } else { n / 2 + 1 })
}

/// Coarse points: every other point starting with the first, plus the last.
pub fn coarse_points(n: usize) -> Vec<usize> {
    let mut c: Vec<usize> = (0..n).step_by(2).collect();
    if n.is_multiple_of(2) {
        c.push(n - 1);
    }
    c
}

// coarse column of each fine point that is a C-point
fn coarse_index(n: usize) -> Vec<Option<usize>> {
    let mut idx = vec![None; n];
    for (c, i) in coarse_points(n).into_iter().enumerate() {
        idx[i] = Some(c);
    }
    idx
}

/// Linear weights between coarse neighbours, for either parity.
pub(crate) fn linear_weights(n: usize) -> DenseMatrix {
    let idx = coarse_index(n);
    let nc = coarse_points(n).len();
    let mut p = DenseMatrix::zeros(n, nc);
    for i in 0..n {
        match idx[i] {
            Some(c) => p[(i, c)] = 1.0,
            None => {
                // fine points always sit between two coarse points
                p[(i, idx[i - 1].expect("coarse left"))] = 0.5;
                p[(i, idx[i + 1].expect("coarse right"))] = 0.5;
            }
        }
    }
    p
}

/// Standard linear interpolation for odd `n >= 5`.
pub fn linear_interpolation(n: usize) -> Result<DenseMatrix> {
    if n < 5 || n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("linear interpolation needs odd n >= 5, got {n}")));
    }
    Ok(linear_weights(n))
}

/// Direct interpolation from the rows of a tridiagonal local operator `A`:
/// for a fine point `i`, `w_ij = -(a_ij / a_ii) * sum_{N_i} a_ik / sum_{C_i} a_ik`
/// over its coarse neighbours `j`. Rows whose coarse-neighbour sum vanishes
/// fall back to linear weights.
pub fn direct_interpolation(a: &DenseMatrix) -> Result<DenseMatrix> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("local operator must be square".into()));
    }
    let n = a.rows();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("direct interpolation needs n >= 4, got {n}")));
    }
    let idx = coarse_index(n);
    let linear = linear_weights(n);
    let mut p = DenseMatrix::zeros(n, linear.cols());
    for i in 0..n {
        if let Some(c) = idx[i] {
            p[(i, c)] = 1.0;
            continue;
        }
        let aii = a[(i, i)];
        if aii == 0.0 {
            return Err(Error::Singular(format!("zero diagonal entry at fine point {i}")));
        }
        let neighbours: f64 = (0..n).filter(|&k| k != i).map(|k| a[(i, k)]).sum();
        let coarse: f64 = (0..n).filter(|&k| k != i && idx[k].is_some()).map(|k| a[(i, k)]).sum();
        if coarse == 0.0 {
            debug!("direct interpolation: row {i} has no coarse coupling, using linear weights");
            for c in 0..p.cols() {
                p[(i, c)] = linear[(i, c)];
            }
            continue;
        }
        let scale = neighbours / coarse;
        for k in 0..n {
            if let Some(c) = idx[k] {
                if k != i && a[(i, k)] != 0.0 {
                    p[(i, c)] = -(a[(i, k)] / aii) * scale;
                }
            }
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_sizes() {
        assert_eq!(coarsen_size(9).unwrap(), 5);
        assert_eq!(coarsen_size(5).unwrap(), 3);
        assert_eq!(coarsen_size(17).unwrap(), 9);
        assert_eq!(coarsen_size(6).unwrap(), 4);
        assert_eq!(coarsen_size(4).unwrap(), 3);
        assert!(coarsen_size(3).is_err());
        for n in 4..40 {
            assert_eq!(coarse_points(n).len(), coarsen_size(n).unwrap());
        }
    }

    #[test]
    fn linear_stencil() {
        let p = linear_interpolation(5).unwrap();
        let expect = [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]];
        for i in 0..5 {
            for j in 0..3 {
                assert_eq!(p[(i, j)], expect[i][j]);
            }
        }
        let p9 = linear_interpolation(9).unwrap();
        assert_eq!((p9.rows(), p9.cols()), (9, 5));
        assert!(p9.matvec(&[1.0; 5]).unwrap().iter().all(|v| (*v - 1.0).abs() < 1e-15));
        assert!(linear_interpolation(6).is_err());
    }

    #[test]
    fn direct_on_laplacian_is_linear() {
        let a = DenseMatrix::from_fn(5, 5, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let p = direct_interpolation(&a).unwrap();
        assert_eq!(p, linear_interpolation(5).unwrap());
    }

    #[test]
    fn direct_on_birth_death_is_stochastic() {
        let (lam, mu) = (1.2, 1.0);
        let n = 9;
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            if j + 1 == i {
                lam
            } else if i + 1 == j {
                mu
            } else if i == j {
                -(if i + 1 < n { lam } else { 0.0 }) - (if i > 0 { mu } else { 0.0 })
            } else {
                0.0
            }
        });
        let p = direct_interpolation(&a).unwrap();
        for i in 0..n {
            let row = p.row(i);
            assert!(row.iter().all(|w| *w >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        for (c, i) in coarse_points(n).into_iter().enumerate() {
            let mut unit = vec![0.0; p.cols()];
            unit[c] = 1.0;
            assert_eq!(p.row(i), unit.as_slice());
        }
    }

    #[test]
    fn direct_rejects_zero_diagonal() {
        let a = DenseMatrix::zeros(5, 5);
        assert!(direct_interpolation(&a).is_err());
    }
}
