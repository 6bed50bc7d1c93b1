//! Thin wrappers over `matrixmultiply` for row-major buffers.

/// `C = op(A) * op(B)` with `C` of shape `m x n`, returned row-major.
///
/// `a` holds `A` row-major as `m x k` (or `k x m` when `ta`), and likewise
/// `b` holds `k x n` (or `n x k` when `tb`).
pub(crate) fn matmul(a: &[f64], ta: bool, b: &[f64], tb: bool, m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    matmul_into(a, ta, b, tb, m, k, n, &mut c);
    c
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn matmul_into(
    a: &[f64],
    ta: bool,
    b: &[f64],
    tb: bool,
    m: usize,
    k: usize,
    n: usize,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k, "lhs buffer does not match m x k");
    assert_eq!(b.len(), k * n, "rhs buffer does not match k x n");
    assert_eq!(c.len(), m * n, "output buffer does not match m x n");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above pin every buffer length to the extents and
    // strides handed to dgemm, so all accesses stay in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    // scaled to avoid overflow on large entries
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * x.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
