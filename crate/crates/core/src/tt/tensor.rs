use rand::Rng;

use super::linalg::{lq_thin, qr_thin};
use crate::error::{Error, Result};
use crate::numkit::blas::{matmul, norm2};

/// Largest dense expansion handed out by [`TTTensor::to_dense`].
pub const DENSE_ENTRY_LIMIT: usize = 1_000_000;

/// One 3-way TT core of shape `(left, mode, right)`, stored row-major with
/// the right rank fastest: entry `(a, i, b)` sits at `(a * mode + i) * right + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Core {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || mode == 0 || right == 0 {
            return Err(Error::InvalidArgument(format!("core shape ({left}, {mode}, {right}) has a zero extent")));
        }
        if data.len() != left * mode * right {
            return Err(Error::DimensionMismatch(format!(
                "core ({left}, {mode}, {right}) needs {} entries, got {}",
                left * mode * right,
                data.len()
            )));
        }
        Ok(Self { left, mode, right, data })
    }

    pub(crate) fn from_parts(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), left * mode * right);
        Self { left, mode, right, data }
    }

    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Self { left, mode, right, data: vec![0.0; left * mode * right] }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.mode + i) * self.right + b]
    }

    /// Slice `G(i)` as a row-major `left x right` matrix.
    pub fn slice(&self, i: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.left * self.right);
        for a in 0..self.left {
            let off = (a * self.mode + i) * self.right;
            out.extend_from_slice(&self.data[off..off + self.right]);
        }
        out
    }

    /// Gram matrix of the left unfolding, `(left*mode) x right` columns.
    pub fn left_gram(&self) -> Vec<f64> {
        let m = self.left * self.mode;
        matmul(&self.data, true, &self.data, false, self.right, m, self.right)
    }

    /// Gram matrix of the rows of the right unfolding, `left x (mode*right)`.
    pub fn right_gram(&self) -> Vec<f64> {
        let n = self.mode * self.right;
        matmul(&self.data, false, &self.data, true, self.left, n, self.left)
    }
}

/// A tensor of shape `n_1 x ... x n_d` in tensor-train format.
///
/// Orthogonality is tracked with two counters: the first `left_orth` cores
/// have orthonormal left unfoldings and the last `right_orth` cores have
/// orthonormal right unfoldings.
#[derive(Clone, Debug, PartialEq)]
pub struct TTTensor {
    cores: Vec<Core>,
    left_orth: usize,
    right_orth: usize,
}

impl TTTensor {
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidArgument("a TT tensor needs at least one core".into()));
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::InvalidArgument("boundary TT ranks must be 1".into()));
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(Error::DimensionMismatch(format!(
                    "core {k} has right rank {} but core {} has left rank {}",
                    w[0].right,
                    k + 1,
                    w[1].left
                )));
            }
        }
        Ok(Self { cores, left_orth: 0, right_orth: 0 })
    }

    pub(crate) fn from_cores_unchecked(cores: Vec<Core>) -> Self {
        Self { cores, left_orth: 0, right_orth: 0 }
    }

    /// The rank-one all-ones tensor.
    pub fn ones(modes: &[usize]) -> Result<Self> {
        Self::constant(modes, 1.0)
    }

    /// Rank-one tensor with every entry equal to `value`.
    pub fn constant(modes: &[usize], value: f64) -> Result<Self> {
        check_modes(modes)?;
        let mut cores: Vec<Core> = modes.iter().map(|&n| Core::from_parts(1, n, 1, vec![1.0; n])).collect();
        cores[0].data.iter_mut().for_each(|v| *v = value);
        Ok(Self::from_cores_unchecked(cores))
    }

    pub fn zeros(modes: &[usize]) -> Result<Self> {
        Self::constant(modes, 0.0)
    }

    /// Random tensor with entries of every core uniform in `[-1, 1)`.
    /// `ranks` lists the `d - 1` interior ranks.
    pub fn random<R: Rng + ?Sized>(modes: &[usize], ranks: &[usize], rng: &mut R) -> Result<Self> {
        check_modes(modes)?;
        if ranks.len() + 1 != modes.len() {
            return Err(Error::InvalidArgument(format!(
                "{} modes need {} interior ranks, got {}",
                modes.len(),
                modes.len() - 1,
                ranks.len()
            )));
        }
        if ranks.contains(&0) {
            return Err(Error::InvalidArgument("ranks must be positive".into()));
        }
        let d = modes.len();
        let cores = (0..d)
            .map(|k| {
                let l = if k == 0 { 1 } else { ranks[k - 1] };
                let r = if k + 1 == d { 1 } else { ranks[k] };
                let data = (0..l * modes[k] * r).map(|_| rng.random_range(-1.0..1.0)).collect();
                Core::from_parts(l, modes[k], r, data)
            })
            .collect();
        Ok(Self::from_cores_unchecked(cores))
    }

    pub fn d(&self) -> usize {
        self.cores.len()
    }

    pub fn modes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.mode).collect()
    }

    /// Full rank vector `r_0, ..., r_d`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.right));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.cores.iter().map(|c| c.right).max().unwrap_or(1)
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    pub fn core(&self, k: usize) -> &Core {
        &self.cores[k]
    }

    /// Number of stored parameters.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Total number of entries `n_1 * ... * n_d` (saturating).
    pub fn full_size(&self) -> usize {
        self.cores.iter().fold(1usize, |acc, c| acc.saturating_mul(c.mode))
    }

    pub fn left_orth(&self) -> usize {
        self.left_orth
    }

    pub fn right_orth(&self) -> usize {
        self.right_orth
    }

    /// Orthogonality center when every other core is orthonormal.
    pub fn center(&self) -> Option<usize> {
        (self.left_orth + self.right_orth + 1 == self.d()).then_some(self.left_orth)
    }

    /// Replaces core `k`; orthogonality tags that depended on it are dropped.
    pub fn set_core(&mut self, k: usize, core: Core) -> Result<()> {
        let d = self.d();
        let want_left = if k == 0 { 1 } else { self.cores[k - 1].right };
        let want_right = if k + 1 == d { 1 } else { self.cores[k + 1].left };
        if core.left != want_left || core.right != want_right || core.mode != self.cores[k].mode {
            return Err(Error::DimensionMismatch(format!(
                "core {k} must be ({want_left}, {}, {want_right}), got ({}, {}, {})",
                self.cores[k].mode, core.left, core.mode, core.right
            )));
        }
        self.cores[k] = core;
        self.left_orth = self.left_orth.min(k);
        self.right_orth = self.right_orth.min(d - 1 - k);
        Ok(())
    }

    /// Replaces cores `k` and `k + 1` together (the bond between them may change).
    pub(crate) fn set_pair(&mut self, k: usize, first: Core, second: Core) {
        debug_assert_eq!(first.right, second.left);
        debug_assert_eq!(first.left, if k == 0 { 1 } else { self.cores[k - 1].right });
        self.cores[k] = first;
        self.cores[k + 1] = second;
    }

    pub(crate) fn core_mut(&mut self, k: usize) -> &mut Core {
        &mut self.cores[k]
    }

    pub(crate) fn set_orth_tags(&mut self, left: usize, right: usize) {
        debug_assert!(left + right <= self.d());
        self.left_orth = left;
        self.right_orth = right;
    }

    pub(crate) fn into_cores(self) -> Vec<Core> {
        self.cores
    }

    fn check_same_modes(&self, other: &TTTensor) -> Result<()> {
        if self.modes() != other.modes() {
            return Err(Error::DimensionMismatch(format!(
                "mode sizes {:?} and {:?} differ",
                self.modes(),
                other.modes()
            )));
        }
        Ok(())
    }

    /// Entrywise sum; interior ranks add.
    pub fn add(&self, other: &TTTensor) -> Result<TTTensor> {
        self.check_same_modes(other)?;
        let d = self.d();
        if d == 1 {
            let data = self.cores[0].data.iter().zip(&other.cores[0].data).map(|(a, b)| a + b).collect();
            return Ok(Self::from_cores_unchecked(vec![Core::from_parts(1, self.cores[0].mode, 1, data)]));
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let (x, y) = (&self.cores[k], &other.cores[k]);
            let n = x.mode;
            let l = if k == 0 { 1 } else { x.left + y.left };
            let r = if k + 1 == d { 1 } else { x.right + y.right };
            let mut c = Core::zeros(l, n, r);
            // x block goes top-left, y block bottom-right; boundary cores concatenate
            let (yl_off, yr_off) = (if k == 0 { 0 } else { x.left }, if k + 1 == d { 0 } else { x.right });
            for a in 0..x.left {
                for i in 0..n {
                    for b in 0..x.right {
                        c.data[(a * n + i) * r + b] = x.at(a, i, b);
                    }
                }
            }
            for a in 0..y.left {
                for i in 0..n {
                    for b in 0..y.right {
                        c.data[((a + yl_off) * n + i) * r + b + yr_off] += y.at(a, i, b);
                    }
                }
            }
            cores.push(c);
        }
        Ok(Self::from_cores_unchecked(cores))
    }

    pub fn sub(&self, other: &TTTensor) -> Result<TTTensor> {
        self.add(&other.scale(-1.0))
    }

    /// Multiplies every entry by `alpha`; the scalar lands in the orthogonality
    /// center when there is one so tags stay valid.
    pub fn scale(&self, alpha: f64) -> TTTensor {
        let mut out = self.clone();
        let k = self.center().unwrap_or(0);
        out.cores[k].data.iter_mut().for_each(|v| *v *= alpha);
        if self.center().is_none() {
            out.left_orth = out.left_orth.min(k);
            out.right_orth = out.right_orth.min(self.d() - 1 - k);
        }
        out
    }

    /// Euclidean inner product of the dense expansions.
    pub fn inner(&self, other: &TTTensor) -> Result<f64> {
        self.check_same_modes(other)?;
        // m is rx x ry
        let mut m = vec![1.0];
        let (mut rx, mut ry) = (1usize, 1usize);
        for (x, y) in self.cores.iter().zip(&other.cores) {
            let n = x.mode;
            // w = m * Y  : rx x (n * ry')
            let w = matmul(&m, false, &y.data, false, rx, ry, n * y.right);
            // m' = X_unf^T * w_unf : (rx', ry')
            m = matmul(&x.data, true, &w, false, x.right, rx * n, y.right);
            rx = x.right;
            ry = y.right;
        }
        Ok(m[0])
    }

    /// Sum of all entries, `<X, 1>`.
    pub fn sum(&self) -> f64 {
        let mut v = vec![1.0];
        for c in &self.cores {
            let mut s = vec![0.0; c.left * c.right];
            for a in 0..c.left {
                for i in 0..c.mode {
                    let off = (a * c.mode + i) * c.right;
                    for b in 0..c.right {
                        s[a * c.right + b] += c.data[off + b];
                    }
                }
            }
            v = matmul(&v, false, &s, false, 1, c.left, c.right);
        }
        v[0]
    }

    /// Euclidean norm, computed from an orthogonalized copy.
    pub fn norm(&self) -> f64 {
        if let Some(k) = self.center() {
            return norm2(&self.cores[k].data);
        }
        let x = self.orthogonalize(self.d() - 1);
        norm2(&x.cores[self.d() - 1].data)
    }

    /// Returns a copy in which cores left of `center` are left-orthonormal and
    /// cores right of it are right-orthonormal. Entries are unchanged.
    pub fn orthogonalize(&self, center: usize) -> TTTensor {
        let mut x = self.clone();
        x.orthogonalize_mut(center);
        x
    }

    pub fn orthogonalize_mut(&mut self, center: usize) {
        let d = self.d();
        assert!(center < d, "orthogonality center {center} out of range for d = {d}");
        for k in self.left_orth..center {
            self.left_step(k);
        }
        let mut k = d - 1 - self.right_orth.min(d - 1);
        while k > center {
            self.right_step(k);
            k -= 1;
        }
        self.left_orth = center;
        self.right_orth = d - 1 - center;
    }

    /// QR of core `k`'s left unfolding, pushing `R` into core `k + 1`.
    pub(crate) fn left_step(&mut self, k: usize) {
        let c = &self.cores[k];
        let (l, n, r) = (c.left, c.mode, c.right);
        let (q, rr, q_cols) = qr_thin(l * n, r, &c.data);
        let next = &self.cores[k + 1];
        let nd = matmul(&rr, false, &next.data, false, q_cols, r, next.mode * next.right);
        let next_core = Core::from_parts(q_cols, next.mode, next.right, nd);
        self.cores[k] = Core::from_parts(l, n, q_cols, q);
        self.cores[k + 1] = next_core;
    }

    /// LQ of core `k`'s right unfolding, pushing `L` into core `k - 1`.
    pub(crate) fn right_step(&mut self, k: usize) {
        let c = &self.cores[k];
        let (l, n, r) = (c.left, c.mode, c.right);
        let (lf, q, q_rows) = lq_thin(l, n * r, &c.data);
        let prev = &self.cores[k - 1];
        let pd = matmul(&prev.data, false, &lf, false, prev.left * prev.mode, l, q_rows);
        let prev_core = Core::from_parts(prev.left, prev.mode, q_rows, pd);
        self.cores[k] = Core::from_parts(q_rows, n, r, q);
        self.cores[k - 1] = prev_core;
    }

    /// Dense expansion with the first mode fastest. Errors above
    /// [`DENSE_ENTRY_LIMIT`] entries.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let total = self.full_size();
        if total > DENSE_ENTRY_LIMIT {
            return Err(Error::SizeGuard(format!("dense expansion of {total} entries exceeds {DENSE_ENTRY_LIMIT}")));
        }
        // m: rows = multi-index over processed modes (first fastest), cols = current rank
        let mut m = vec![1.0];
        let mut rows = 1usize;
        for c in &self.cores {
            let mut next = vec![0.0; rows * c.mode * c.right];
            for i in 0..c.mode {
                let g = c.slice(i);
                let block = matmul(&m, false, &g, false, rows, c.left, c.right);
                next[i * rows * c.right..(i + 1) * rows * c.right].copy_from_slice(&block);
            }
            m = next;
            rows *= c.mode;
        }
        Ok(m)
    }

    /// Entry at a multi-index.
    pub fn entry(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.d());
        let mut v = vec![1.0];
        for (c, &i) in self.cores.iter().zip(index) {
            v = matmul(&v, false, &c.slice(i), false, 1, c.left, c.right);
        }
        v[0]
    }

    /// Checks the orthogonality tags against the cores: every tagged unfolding
    /// must have Gram matrix equal to the identity within `tol`.
    pub fn orthogonality_defect(&self) -> f64 {
        let d = self.d();
        let mut worst = 0.0f64;
        for k in 0..self.left_orth {
            worst = worst.max(identity_defect(&self.cores[k].left_gram(), self.cores[k].right));
        }
        for k in d - self.right_orth..d {
            worst = worst.max(identity_defect(&self.cores[k].right_gram(), self.cores[k].left));
        }
        worst
    }
}

fn identity_defect(gram: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[i * n + j] - want).abs());
        }
    }
    worst
}

fn check_modes(modes: &[usize]) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::InvalidArgument("mode list is empty".into()));
    }
    if modes.contains(&0) {
        return Err(Error::InvalidArgument(format!("mode sizes must be positive, got {modes:?}")));
    }
    Ok(())
}

/// Strides of the first-mode-fastest linearization.
pub fn strides(modes: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(modes.len());
    let mut acc = 1;
    for &n in modes {
        s.push(acc);
        acc *= n;
    }
    s
}

/// Multi-index of a linear position under the first-mode-fastest order.
pub fn unravel(mut pos: usize, modes: &[usize]) -> Vec<usize> {
    modes
        .iter()
        .map(|&n| {
            let i = pos % n;
            pos /= n;
            i
        })
        .collect()
}
