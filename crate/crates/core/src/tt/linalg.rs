//! QR/SVD on row-major buffers, used by orthogonalization and rounding.

use nalgebra::DMatrix;

/// Thin QR of a row-major `m x n` matrix: `Q` row-major `m x q`, `R` row-major
/// `q x n`, `q = min(m, n)`.
pub(crate) fn qr_thin(m: usize, n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>, usize) {
    let mat = DMatrix::from_row_slice(m, n, a);
    let qr = mat.qr();
    let q = qr.q();
    let r = qr.r();
    let k = q.ncols();
    (to_row_major(&q), to_row_major(&r), k)
}

/// Thin QR of the transpose of a row-major `m x n` matrix, returned as an LQ
/// factorization `A = L Q` with `L` row-major `m x q` and `Q` row-major `q x n`
/// having orthonormal rows.
pub(crate) fn lq_thin(m: usize, n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>, usize) {
    // row-major A is column-major A^T
    let at = DMatrix::from_column_slice(n, m, a);
    let qr = at.qr();
    let q = qr.q(); // n x k
    let r = qr.r(); // k x m
    let k = q.ncols();
    // column-major R (k x m) is row-major R^T = L; column-major Q (n x k) is row-major Q^T
    (r.as_slice().to_vec(), q.as_slice().to_vec(), k)
}

pub(crate) struct Svd {
    /// row-major `m x p`
    pub u: Vec<f64>,
    /// descending
    pub s: Vec<f64>,
    /// row-major `p x n`
    pub vt: Vec<f64>,
    pub p: usize,
}

/// Thin SVD of a row-major `m x n` matrix with singular values sorted in
/// descending order.
pub(crate) fn svd_thin(m: usize, n: usize, a: &[f64]) -> Svd {
    let p = m.min(n);
    if p == 0 {
        return Svd { u: vec![], s: vec![], vt: vec![], p: 0 };
    }
    let mat = DMatrix::from_row_slice(m, n, a);
    let svd = mat.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let mut uo = vec![0.0; m * p];
    let mut vo = vec![0.0; p * n];
    let mut s = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        s.push(svd.singular_values[src]);
        for i in 0..m {
            uo[i * p + dst] = u[(i, src)];
        }
        for j in 0..n {
            vo[dst * n + j] = vt[(src, j)];
        }
    }
    Svd { u: uo, s, vt: vo, p }
}

/// Smallest rank whose discarded tail has Euclidean norm `<= tol`, clamped
/// to `[1, max_rank]`. Returns the rank and the discarded tail norm.
pub(crate) fn choose_rank(s: &[f64], tol: f64, max_rank: usize) -> (usize, f64) {
    let p = s.len();
    if p == 0 {
        return (0, 0.0);
    }
    // tail[r] = || s[r..] ||
    let mut tail = vec![0.0f64; p + 1];
    for r in (0..p).rev() {
        tail[r] = tail[r + 1].hypot(s[r]);
    }
    let mut r = (0..=p).find(|&r| tail[r] <= tol).unwrap_or(p);
    r = r.clamp(1, max_rank.max(1)).min(p);
    (r, tail[r])
}

fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}
