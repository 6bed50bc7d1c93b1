use super::tensor::{Core, TTTensor};
use super::truncate::TruncationPolicy;
use crate::error::{Error, Result};
use crate::models::KroneckerModel;
use crate::numkit::blas::matmul;
use crate::numkit::DenseMatrix;

/// Largest dimension `N = n_1 ... n_d` for which [`TTOperator::to_dense`] works.
pub const DENSE_OPERATOR_LIMIT: usize = 4096;

/// One operator-TT core of shape `(left, rows, cols, right)`, right rank
/// fastest: entry `(a, i, j, b)` at `((a * rows + i) * cols + j) * right + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct OpCore {
    left: usize,
    rows: usize,
    cols: usize,
    right: usize,
    data: Vec<f64>,
}

impl OpCore {
    pub fn new(left: usize, rows: usize, cols: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != left * rows * cols * right {
            return Err(Error::DimensionMismatch(format!(
                "operator core ({left}, {rows}, {cols}, {right}) needs {} entries, got {}",
                left * rows * cols * right,
                data.len()
            )));
        }
        Ok(Self { left, rows, cols, right, data })
    }

    pub fn left(&self) -> usize {
        self.left
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn right(&self) -> usize {
        self.right
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, a: usize, i: usize, j: usize, b: usize) -> f64 {
        self.data[((a * self.rows + i) * self.cols + j) * self.right + b]
    }

    /// Rearranged copy with layout `[(a, i, b), j]` (row-major), used as the
    /// left operand when contracting over the column index.
    fn rows_by_col(&self) -> Vec<f64> {
        let (l, n, m, r) = (self.left, self.rows, self.cols, self.right);
        let mut out = vec![0.0; l * n * r * m];
        for a in 0..l {
            for i in 0..n {
                for j in 0..m {
                    for b in 0..r {
                        out[((a * n + i) * r + b) * m + j] = self.data[((a * n + i) * m + j) * r + b];
                    }
                }
            }
        }
        out
    }
}

/// A square operator on `n_1 x ... x n_d` tensors in operator-TT format.
#[derive(Clone, Debug, PartialEq)]
pub struct TTOperator {
    cores: Vec<OpCore>,
}

impl TTOperator {
    pub fn from_cores(cores: Vec<OpCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidArgument("operator needs at least one core".into()));
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::InvalidArgument("boundary operator ranks must be 1".into()));
        }
        for w in cores.windows(2) {
            if w[0].right != w[1].left {
                return Err(Error::DimensionMismatch("operator ranks do not chain".into()));
            }
        }
        for c in &cores {
            if c.rows != c.cols {
                return Err(Error::InvalidArgument("operator modes must be square".into()));
            }
        }
        Ok(Self { cores })
    }

    pub fn identity(modes: &[usize]) -> Result<Self> {
        let cores = modes
            .iter()
            .map(|&n| {
                let mut data = vec![0.0; n * n];
                for i in 0..n {
                    data[i * n + i] = 1.0;
                }
                OpCore { left: 1, rows: n, cols: n, right: 1, data }
            })
            .collect();
        Self::from_cores(cores)
    }

    /// Rank-one operator `F_1 (x) ... (x) F_d` acting mode-wise.
    pub fn from_factors(factors: &[DenseMatrix]) -> Result<Self> {
        let cores = factors
            .iter()
            .map(|f| {
                if !f.is_square() {
                    return Err(Error::InvalidArgument("factors must be square".into()));
                }
                Ok(OpCore { left: 1, rows: f.rows(), cols: f.cols(), right: 1, data: f.as_slice().to_vec() })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_cores(cores)
    }

    /// Operator-TT form of `sum_t E_1^t (x) ... (x) E_d^t` (factor `k` acting on
    /// mode `k`), compressed by TT rounding so ranks are at most `T`.
    pub fn from_kronecker(model: &KroneckerModel) -> Result<Self> {
        let modes = model.modes();
        let d = modes.len();
        let t = model.terms().len();
        if t == 0 {
            return Err(Error::InvalidModel("model has no terms".into()));
        }
        let mut cores = Vec::with_capacity(d);
        for (k, &n) in modes.iter().enumerate() {
            let l = if k == 0 { 1 } else { t };
            let r = if k + 1 == d { 1 } else { t };
            let mut data = vec![0.0; l * n * n * r];
            for (ti, term) in model.terms().iter().enumerate() {
                let f = &term.factors()[k];
                if f.n() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "term {ti} factor {k} has size {} but mode size is {n}",
                        f.n()
                    )));
                }
                let a = if k == 0 { 0 } else { ti };
                let b = if k + 1 == d { 0 } else { ti };
                for &(i, j, v) in f.entries() {
                    data[((a * n + i) * n + j) * r + b] += v;
                }
            }
            cores.push(OpCore { left: l, rows: n, cols: n, right: r, data });
        }
        let op = Self::from_cores(cores)?;
        Ok(op.compress(1e-14))
    }

    pub fn d(&self) -> usize {
        self.cores.len()
    }

    pub fn modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.rows).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.right));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.cores.iter().map(|c| c.right).max().unwrap_or(1)
    }

    pub fn cores(&self) -> &[OpCore] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &OpCore {
        &self.cores[k]
    }

    /// Views the operator as a TT tensor with combined modes `n_k^2`.
    fn as_tensor(&self) -> TTTensor {
        let cores = self
            .cores
            .iter()
            .map(|c| Core::from_parts(c.left, c.rows * c.cols, c.right, c.data.clone()))
            .collect();
        TTTensor::from_cores_unchecked(cores)
    }

    fn from_tensor(t: TTTensor, modes: &[usize]) -> Self {
        let cores = t
            .into_cores()
            .into_iter()
            .zip(modes)
            .map(|(c, &n)| OpCore { left: c.left(), rows: n, cols: n, right: c.right(), data: c.into_data() })
            .collect();
        Self { cores }
    }

    /// Frobenius norm of the dense operator.
    pub fn frobenius_norm(&self) -> f64 {
        self.as_tensor().norm()
    }

    /// Rounds operator ranks with relative Frobenius accuracy `rel_tol`.
    pub fn compress(&self, rel_tol: f64) -> TTOperator {
        let modes = self.modes();
        let t = self.as_tensor().truncate(&TruncationPolicy::relative(rel_tol, usize::MAX));
        Self::from_tensor(t, &modes)
    }

    pub fn transpose(&self) -> TTOperator {
        let cores = self
            .cores
            .iter()
            .map(|c| {
                let (l, n, m, r) = (c.left, c.rows, c.cols, c.right);
                let mut data = vec![0.0; c.data.len()];
                for a in 0..l {
                    for i in 0..n {
                        for j in 0..m {
                            for b in 0..r {
                                data[((a * m + j) * n + i) * r + b] = c.at(a, i, j, b);
                            }
                        }
                    }
                }
                OpCore { left: l, rows: m, cols: n, right: r, data }
            })
            .collect();
        Self { cores }
    }

    /// Product `self * other`; ranks multiply.
    pub fn compose(&self, other: &TTOperator) -> Result<TTOperator> {
        if self.modes() != other.modes() {
            return Err(Error::DimensionMismatch("operators act on different modes".into()));
        }
        let cores = self
            .cores
            .iter()
            .zip(&other.cores)
            .map(|(a, b)| {
                let n = a.rows;
                // lhs [(al, i, ar), m], rhs [m, (bl, j, br)]
                let lhs = a.rows_by_col();
                let mut rhs = vec![0.0; n * b.left * n * b.right];
                for bl in 0..b.left {
                    for m in 0..n {
                        for j in 0..n {
                            for br in 0..b.right {
                                rhs[((m * b.left + bl) * n + j) * b.right + br] = b.at(bl, m, j, br);
                            }
                        }
                    }
                }
                let prod = matmul(&lhs, false, &rhs, false, a.left * n * a.right, n, b.left * n * b.right);
                let (l, r) = (a.left * b.left, a.right * b.right);
                let mut data = vec![0.0; l * n * n * r];
                for al in 0..a.left {
                    for i in 0..n {
                        for ar in 0..a.right {
                            let row = ((al * n + i) * a.right + ar) * (b.left * n * b.right);
                            for bl in 0..b.left {
                                for j in 0..n {
                                    for br in 0..b.right {
                                        let v = prod[row + (bl * n + j) * b.right + br];
                                        let (cl, cr) = (al * b.left + bl, ar * b.right + br);
                                        data[((cl * n + i) * n + j) * r + cr] = v;
                                    }
                                }
                            }
                        }
                    }
                }
                OpCore { left: l, rows: n, cols: n, right: r, data }
            })
            .collect();
        Ok(Self { cores })
    }

    /// Matrix-vector product in TT format; result ranks are `r_A * r_X`.
    pub fn apply(&self, x: &TTTensor) -> Result<TTTensor> {
        if self.modes() != x.modes() {
            return Err(Error::DimensionMismatch(format!(
                "operator modes {:?} do not match tensor modes {:?}",
                self.modes(),
                x.modes()
            )));
        }
        let cores = self.cores.iter().zip(x.cores()).map(|(a, c)| apply_core(a, c)).collect();
        Ok(TTTensor::from_cores_unchecked(cores))
    }

    /// Mode-wise application of rank-one factors `M_k` (`m_k x n_k`, possibly
    /// rectangular), as used by interpolation and restriction.
    pub fn apply_factors(factors: &[DenseMatrix], x: &TTTensor) -> Result<TTTensor> {
        if factors.len() != x.d() {
            return Err(Error::DimensionMismatch("one factor per mode is required".into()));
        }
        let cores = factors
            .iter()
            .zip(x.cores())
            .map(|(f, c)| {
                if f.cols() != c.mode() {
                    return Err(Error::DimensionMismatch(format!(
                        "factor with {} columns applied to mode of size {}",
                        f.cols(),
                        c.mode()
                    )));
                }
                let (l, n, r) = (c.left(), c.mode(), c.right());
                let m = f.rows();
                let mut out = vec![0.0; l * m * r];
                for a in 0..l {
                    let block = &c.data()[a * n * r..(a + 1) * n * r];
                    let prod = matmul(f.as_slice(), false, block, false, m, n, r);
                    out[a * m * r..(a + 1) * m * r].copy_from_slice(&prod);
                }
                Ok(Core::from_parts(l, m, r, out))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TTTensor::from_cores_unchecked(cores))
    }

    /// Dense matrix with first-mode-fastest row and column linearization.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        let n: usize = self.modes().iter().product();
        if n > DENSE_OPERATOR_LIMIT {
            return Err(Error::SizeGuard(format!("dense operator of dimension {n} exceeds {DENSE_OPERATOR_LIMIT}")));
        }
        let modes = self.modes();
        let mut out = DenseMatrix::zeros(n, n);
        // walk the combined index; row/col offsets follow first-mode-fastest strides
        let strides = super::tensor::strides(&modes);
        let mut m: Vec<(usize, usize, Vec<f64>)> = vec![(0, 0, vec![1.0])];
        for (k, c) in self.cores.iter().enumerate() {
            let mut next = Vec::with_capacity(m.len() * c.rows * c.cols);
            for (row, col, v) in &m {
                for i in 0..c.rows {
                    for j in 0..c.cols {
                        let mut w = vec![0.0; c.right];
                        for a in 0..c.left {
                            if v[a] == 0.0 {
                                continue;
                            }
                            for b in 0..c.right {
                                w[b] += v[a] * c.at(a, i, j, b);
                            }
                        }
                        if w.iter().any(|x| *x != 0.0) {
                            next.push((row + i * strides[k], col + j * strides[k], w));
                        }
                    }
                }
            }
            m = next;
        }
        for (row, col, v) in m {
            out[(row, col)] += v[0];
        }
        Ok(out)
    }
}

fn apply_core(a: &OpCore, x: &Core) -> Core {
    let (al, n, ar) = (a.left, a.rows, a.right);
    let (xl, xr) = (x.left(), x.right());
    let m = a.cols;
    // lhs [(al, i, ar), j], rhs [j, (xl, xr)]
    let lhs = a.rows_by_col();
    let mut rhs = vec![0.0; m * xl * xr];
    for p in 0..xl {
        for j in 0..m {
            for q in 0..xr {
                rhs[(j * xl + p) * xr + q] = x.at(p, j, q);
            }
        }
    }
    let prod = matmul(&lhs, false, &rhs, false, al * n * ar, m, xl * xr);
    let (l, r) = (al * xl, ar * xr);
    let mut data = vec![0.0; l * n * r];
    for aa in 0..al {
        for i in 0..n {
            for bb in 0..ar {
                let row = ((aa * n + i) * ar + bb) * xl * xr;
                for p in 0..xl {
                    for q in 0..xr {
                        data[((aa * xl + p) * n + i) * r + bb * xr + q] = prod[row + p * xr + q];
                    }
                }
            }
        }
    }
    Core::from_parts(l, n, r, data)
}

/// `||A x||` computed through orthogonalization of the product.
pub fn residual_norm(a: &TTOperator, x: &TTTensor) -> Result<f64> {
    Ok(a.apply(x)?.norm())
}

/// `||b - A x||`.
pub fn affine_residual_norm(a: &TTOperator, x: &TTTensor, b: &TTTensor) -> Result<f64> {
    let ax = a.apply(x)?;
    Ok(b.sub(&ax)?.norm())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_model, ModelKind, ModelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(modes: &[usize], rank: usize, seed: u64) -> TTOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = modes.len();
        let cores = modes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let l = if k == 0 { 1 } else { rank };
                let r = if k + 1 == d { 1 } else { rank };
                let data = (0..l * n * n * r).map(|_| rng.random_range(-1.0..1.0)).collect();
                OpCore::new(l, n, n, r, data).unwrap()
            })
            .collect();
        TTOperator::from_cores(cores).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_apply() {
        let x = TTTensor::random(&[3, 4, 2], &[2, 3], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let y = TTOperator::identity(&[3, 4, 2]).unwrap().apply(&x).unwrap();
        assert!(max_diff(&y.to_dense().unwrap(), &x.to_dense().unwrap()) < 1e-15);
    }

    #[test]
    fn apply_matches_dense_and_multiplies_ranks() {
        let a = random_op(&[3, 2, 4], 2, 2);
        let x = TTTensor::random(&[3, 2, 4], &[3, 3], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let y = a.apply(&x).unwrap();
        assert_eq!(y.ranks(), vec![1, 6, 6, 1]);
        let expect = a.to_dense().unwrap().matvec(&x.to_dense().unwrap()).unwrap();
        assert!(max_diff(&y.to_dense().unwrap(), &expect) < 1e-12 * x.norm() * a.frobenius_norm());
        assert!(a.apply(&TTTensor::ones(&[3, 2, 5]).unwrap()).is_err());
    }

    #[test]
    fn compose_and_transpose_match_dense() {
        let a = random_op(&[2, 3, 2], 2, 4);
        let b = random_op(&[2, 3, 2], 3, 5);
        let ab = a.compose(&b).unwrap();
        assert_eq!(ab.ranks(), vec![1, 6, 6, 1]);
        let expect = a.to_dense().unwrap().matmul(&b.to_dense().unwrap()).unwrap();
        assert!(max_diff(ab.to_dense().unwrap().as_slice(), expect.as_slice()) < 1e-12 * expect.frobenius_norm());
        let at = a.transpose().to_dense().unwrap();
        assert_eq!(at, a.to_dense().unwrap().transpose());
    }

    #[test]
    fn compression_keeps_values() {
        let a = random_op(&[3, 3, 3], 2, 6);
        let twice = TTOperator::from_cores(
            a.cores()
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let w = if k == 0 { 2.0 } else { 1.0 };
                    let data = c.data().iter().map(|v| w * v).collect();
                    OpCore::new(c.left(), c.rows(), c.cols(), c.right(), data).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let sum = TTOperator::from_tensor(a.as_tensor().add(&a.as_tensor()).unwrap(), &a.modes());
        let c = sum.compress(1e-14);
        assert!(c.max_rank() <= 2);
        let diff = max_diff(c.to_dense().unwrap().as_slice(), twice.to_dense().unwrap().as_slice());
        assert!(diff < 1e-12 * twice.frobenius_norm());
    }

    #[test]
    fn kronecker_conversion_small_overflow() {
        let model = build_model(&ModelSpec::new(ModelKind::Overflow, 2, 1)).unwrap();
        let op = TTOperator::from_kronecker(&model).unwrap();
        assert!(op.max_rank() <= model.terms().len());
        let dense = model.assemble_dense().unwrap();
        assert!(max_diff(op.to_dense().unwrap().as_slice(), dense.as_slice()) < 1e-13);
    }

    #[test]
    fn single_term_has_unit_ranks() {
        let f = DenseMatrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64);
        let op = TTOperator::from_factors(&[f.clone(), f.clone()]).unwrap();
        assert_eq!(op.ranks(), vec![1, 1, 1]);
        assert_eq!(op.to_dense().unwrap(), f.kron(&f));
    }

    #[test]
    fn mode_factors_act_per_mode() {
        let x = TTTensor::random(&[3, 4], &[2], &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let p = DenseMatrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 * 0.1);
        let q = DenseMatrix::from_fn(2, 4, |i, j| (i + j) as f64);
        let y = TTOperator::apply_factors(&[p.clone(), q.clone()], &x).unwrap();
        assert_eq!(y.modes(), vec![5, 2]);
        assert_eq!(y.ranks(), x.ranks());
        // kron(q, p) acts on first-mode-fastest vectors
        let expect = q.kron(&p).matvec(&x.to_dense().unwrap()).unwrap();
        assert!(max_diff(&y.to_dense().unwrap(), &expect) < 1e-12);
    }
}
