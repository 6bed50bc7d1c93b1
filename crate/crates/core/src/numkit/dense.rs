use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::blas;
use crate::error::{Error, Result};

/// Relative pivot threshold below which LU is treated as singular.
const PIVOT_TOL: f64 = 1e-12;

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let data = blas::matmul(&self.data, false, &rhs.data, false, self.rows, self.cols, rhs.cols);
        Ok(Self { rows: self.rows, cols: rhs.cols, data })
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| blas::dot(self.row(i), x)).collect())
    }

    /// Kronecker product in the standard convention (`self` indexes the slow block).
    pub fn kron(&self, rhs: &DenseMatrix) -> DenseMatrix {
        let (r, c) = (self.rows * rhs.rows, self.cols * rhs.cols);
        Self::from_fn(r, c, |i, j| {
            self[(i / rhs.rows, j / rhs.cols)] * rhs[(i % rhs.rows, j % rhs.cols)]
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        blas::norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (acc, v) in s.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        s
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| alpha * v).collect() }
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for v in self.row(i).iter().take(12) {
                write!(f, "{v:>11.4e} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Result of a pivoted LU solve, with the pivot ratio kept as a cheap
/// conditioning indicator.
#[derive(Clone, Debug)]
pub struct LuSolution {
    pub x: Vec<f64>,
    /// `max |u_ii| / min |u_ii|` of the LU factor.
    pub pivot_ratio: f64,
}

fn check_square_system(a: &DenseMatrix, b: &[f64]) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} system is not square", a.rows, a.cols)));
    }
    if b.len() != a.rows {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side of length {} for a {}x{} system",
            b.len(),
            a.rows,
            a.cols
        )));
    }
    Ok(())
}

/// Pivoted LU solve that refuses numerically singular systems.
pub(crate) fn lu_solve_strict(a: &DenseMatrix, b: &[f64]) -> Result<LuSolution> {
    check_square_system(a, b)?;
    let n = a.rows;
    if n == 0 {
        return Ok(LuSolution { x: vec![], pivot_ratio: 1.0 });
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(Error::Singular("zero matrix".into()));
    }
    let lu = a.to_nalgebra().lu();
    let u = lu.u();
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let p = u[(i, i)].abs();
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    if pmin <= PIVOT_TOL * scale || !pmin.is_finite() {
        return Err(Error::Singular(format!("LU pivot {pmin:.3e} below tolerance (scale {scale:.3e})")));
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = lu.solve(&rhs).ok_or_else(|| Error::Singular("LU solve failed".into()))?;
    Ok(LuSolution { x: x.as_slice().to_vec(), pivot_ratio: pmax / pmin })
}

/// Solves `A x = b` by pivoted LU; singular systems fall back to the
/// minimum-norm least-squares solution.
pub fn dense_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_square_system(a, b)?;
    match lu_solve_strict(a, b) {
        Ok(sol) => Ok(sol.x),
        Err(Error::Singular(_)) => lstsq_min_norm(a, b),
        Err(e) => Err(e),
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b` (any shape).
pub fn lstsq_min_norm(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.rows {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side of length {} for a {}x{} matrix",
            b.len(),
            a.rows,
            a.cols
        )));
    }
    Ok(PseudoInverse::new(a).apply(b))
}

/// Cached SVD of a dense matrix for repeated minimum-norm solves.
#[derive(Clone, Debug)]
pub struct PseudoInverse {
    rows: usize,
    cols: usize,
    /// `U_r^T`, row-major `r x rows`.
    ut: Vec<f64>,
    /// `V_r`, row-major `cols x r`.
    v: Vec<f64>,
    inv_sigma: Vec<f64>,
}

impl PseudoInverse {
    /// Singular values below `1e-12 * sigma_max` are dropped.
    pub fn new(a: &DenseMatrix) -> Self {
        let (rows, cols) = (a.rows, a.cols);
        if rows == 0 || cols == 0 {
            return Self { rows, cols, ut: vec![], v: vec![], inv_sigma: vec![] };
        }
        let svd = a.to_nalgebra().svd(true, true);
        let u = svd.u.as_ref().expect("svd requested u");
        let vt = svd.v_t.as_ref().expect("svd requested v_t");
        let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
        let keep: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-12 * smax).collect();
        let r = keep.len();
        let mut ut = vec![0.0; r * rows];
        let mut v = vec![0.0; cols * r];
        let mut inv_sigma = Vec::with_capacity(r);
        for (p, &i) in keep.iter().enumerate() {
            inv_sigma.push(1.0 / svd.singular_values[i]);
            for row in 0..rows {
                ut[p * rows + row] = u[(row, i)];
            }
            for col in 0..cols {
                v[col * r + p] = vt[(i, col)];
            }
        }
        Self { rows, cols, ut, v, inv_sigma }
    }

    pub fn rank(&self) -> usize {
        self.inv_sigma.len()
    }

    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.rows);
        let r = self.rank();
        if r == 0 {
            return vec![0.0; self.cols];
        }
        let mut c = blas::matmul(&self.ut, false, b, false, r, self.rows, 1);
        for (ci, s) in c.iter_mut().zip(&self.inv_sigma) {
            *ci *= s;
        }
        blas::matmul(&self.v, false, &c, false, self.cols, r, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &DenseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x).unwrap();
        blas::norm2(&ax.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>())
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5];
        let x = dense_solve(&DenseMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_two_by_two() {
        let a = DenseMatrix::from_row_major(2, 2, vec![2.0, 0.0, 0.0, 4.0]).unwrap();
        let x = dense_solve(&a, &[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            let v: f64 = rng.random_range(-1.0..1.0);
            if i == j { v + 10.0 } else { v }
        });
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = dense_solve(&a, &b).unwrap();
        let bound = 1e-10 * (a.frobenius_norm() * blas::norm2(&x) + blas::norm2(&b));
        assert!(residual(&a, &x, &b) <= bound);
    }

    #[test]
    fn singular_system_falls_back_to_min_norm() {
        // rank-one 2x2, consistent rhs
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let x = dense_solve(&a, &[2.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(matches!(lu_solve_strict(&a, &[2.0, 2.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = DenseMatrix::identity(3);
        assert!(matches!(dense_solve(&a, &[1.0]), Err(Error::DimensionMismatch(_))));
        let r = DenseMatrix::zeros(2, 3);
        assert!(matches!(dense_solve(&r, &[1.0, 2.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn pseudo_inverse_of_zero_rhs_is_zero() {
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        let p = PseudoInverse::new(&a);
        assert_eq!(p.rank(), 1);
        assert_eq!(p.apply(&[0.0, 0.0]), vec![0.0, 0.0]);
    }
}
