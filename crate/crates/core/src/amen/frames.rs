//! Three-index interface contractions `Phi[y, o, x]` between a "test" tensor
//! `Y`, an operator and a "trial" tensor `V`, and the local products built
//! from them.

use crate::numkit::blas::matmul;
use crate::tt::{Core, OpCore};

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub ry: usize,
    pub ro: usize,
    pub rx: usize,
    /// Entry `(y, o, x)` at `(y * ro + o) * rx + x`.
    pub data: Vec<f64>,
}

impl Frame {
    pub fn unit() -> Self {
        Self { ry: 1, ro: 1, rx: 1, data: vec![1.0] }
    }
}

// op permuted to [(o, j), (i, o2)]
fn op_by_col(op: &OpCore) -> Vec<f64> {
    let (l, n, m, r) = (op.left(), op.rows(), op.cols(), op.right());
    let mut out = vec![0.0; l * m * n * r];
    for o in 0..l {
        for i in 0..n {
            for j in 0..m {
                for o2 in 0..r {
                    out[((o * m + j) * n + i) * r + o2] = op.at(o, i, j, o2);
                }
            }
        }
    }
    out
}

// op permuted to [(j, o2), (o, i)]
fn op_by_col_right(op: &OpCore) -> Vec<f64> {
    let (l, n, m, r) = (op.left(), op.rows(), op.cols(), op.right());
    let mut out = vec![0.0; m * r * l * n];
    for o in 0..l {
        for i in 0..n {
            for j in 0..m {
                for o2 in 0..r {
                    out[((j * r + o2) * l + o) * n + i] = op.at(o, i, j, o2);
                }
            }
        }
    }
    out
}

/// `T2[(y, x2), (i, o2)] = sum_{x, o, j} Phi[y, o, x] V[x, j, x2] Op[o, i, j, o2]`.
fn left_half(phi: &Frame, op: &OpCore, v: &Core) -> Vec<f64> {
    let (ry, ro, rx) = (phi.ry, phi.ro, phi.rx);
    debug_assert_eq!(ro, op.left());
    debug_assert_eq!(rx, v.left());
    let (m, rx2) = (v.mode(), v.right());
    let (n, ro2) = (op.rows(), op.right());
    let t1 = matmul(&phi.data, false, v.data(), false, ry * ro, rx, m * rx2);
    let mut p1 = vec![0.0; ry * rx2 * ro * m];
    for y in 0..ry {
        for o in 0..ro {
            for j in 0..m {
                let src = ((y * ro + o) * m + j) * rx2;
                for x2 in 0..rx2 {
                    p1[((y * rx2 + x2) * ro + o) * m + j] = t1[src + x2];
                }
            }
        }
    }
    matmul(&p1, false, &op_by_col(op), false, ry * rx2, ro * m, n * ro2)
}

/// Extends a left frame by one core.
pub fn frame_left(phi: &Frame, y: &Core, op: &OpCore, v: &Core) -> Frame {
    let (ry, rx2) = (phi.ry, v.right());
    let (n, ro2) = (op.rows(), op.right());
    debug_assert_eq!(y.left(), ry);
    let t2 = left_half(phi, op, v);
    let mut p2 = vec![0.0; ry * n * ro2 * rx2];
    for yy in 0..ry {
        for x2 in 0..rx2 {
            for i in 0..n {
                let src = ((yy * rx2 + x2) * n + i) * ro2;
                for o2 in 0..ro2 {
                    p2[((yy * n + i) * ro2 + o2) * rx2 + x2] = t2[src + o2];
                }
            }
        }
    }
    let ry2 = y.right();
    let data = matmul(y.data(), true, &p2, false, ry2, ry * n, ro2 * rx2);
    Frame { ry: ry2, ro: ro2, rx: rx2, data }
}

/// Extends a right frame by one core (the core is to the left of the frame).
pub fn frame_right(psi: &Frame, y: &Core, op: &OpCore, v: &Core) -> Frame {
    let (ry2, ro2, rx2) = (psi.ry, psi.ro, psi.rx);
    let (rx, m) = (v.left(), v.mode());
    let (ro, n) = (op.left(), op.rows());
    debug_assert_eq!(v.right(), rx2);
    debug_assert_eq!(op.right(), ro2);
    debug_assert_eq!(y.right(), ry2);
    let t1 = matmul(v.data(), false, &psi.data, true, rx * m, rx2, ry2 * ro2);
    let mut p1 = vec![0.0; rx * ry2 * m * ro2];
    for x in 0..rx {
        for j in 0..m {
            for y2 in 0..ry2 {
                let src = ((x * m + j) * ry2 + y2) * ro2;
                let dst = (x * ry2 + y2) * m * ro2 + j * ro2;
                p1[dst..dst + ro2].copy_from_slice(&t1[src..src + ro2]);
            }
        }
    }
    let t2 = matmul(&p1, false, &op_by_col_right(op), false, rx * ry2, m * ro2, ro * n);
    let mut p2 = vec![0.0; n * ry2 * ro * rx];
    for x in 0..rx {
        for y2 in 0..ry2 {
            for o in 0..ro {
                let src = ((x * ry2 + y2) * ro + o) * n;
                for i in 0..n {
                    p2[((i * ry2 + y2) * ro + o) * rx + x] = t2[src + i];
                }
            }
        }
    }
    let ry = y.left();
    let data = matmul(y.data(), false, &p2, false, ry, n * ry2, ro * rx);
    Frame { ry, ro, rx, data }
}

/// Local product `(Phi (x) Op (x) Psi) v`, returned in the core layout
/// `(phi.ry, rows, psi.ry)`.
pub fn local_apply(phi: &Frame, op: &OpCore, v: &Core, psi: &Frame) -> Vec<f64> {
    let (ry, rx2) = (phi.ry, v.right());
    let (n, ro2) = (op.rows(), op.right());
    debug_assert_eq!(psi.ro, ro2);
    debug_assert_eq!(psi.rx, rx2);
    let t2 = left_half(phi, op, v);
    let mut p2 = vec![0.0; ry * n * ro2 * rx2];
    for yy in 0..ry {
        for x2 in 0..rx2 {
            for i in 0..n {
                let src = ((yy * rx2 + x2) * n + i) * ro2;
                for o2 in 0..ro2 {
                    p2[((yy * n + i) * ro2 + o2) * rx2 + x2] = t2[src + o2];
                }
            }
        }
    }
    matmul(&p2, false, &psi.data, true, ry * n, ro2 * rx2, psi.ry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::{TTOperator, TTTensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(modes: &[usize], rank: usize, rng: &mut ChaCha8Rng) -> TTOperator {
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

    #[test]
    fn full_contractions_give_bilinear_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let modes = [3, 2, 4];
        let a = random_op(&modes, 2, &mut rng);
        let y = TTTensor::random(&modes, &[2, 3], &mut rng).unwrap();
        let v = TTTensor::random(&modes, &[3, 2], &mut rng).unwrap();
        let expect = y.inner(&a.apply(&v).unwrap()).unwrap();
        let mut phi = Frame::unit();
        for k in 0..3 {
            phi = frame_left(&phi, y.core(k), a.core(k), v.core(k));
        }
        assert!((phi.data[0] - expect).abs() < 1e-12 * expect.abs().max(1.0));
        let mut psi = Frame::unit();
        for k in (0..3).rev() {
            psi = frame_right(&psi, y.core(k), a.core(k), v.core(k));
        }
        assert!((psi.data[0] - expect).abs() < 1e-12 * expect.abs().max(1.0));
        // local product at the middle core contracted with y's core
        let phi1 = frame_left(&Frame::unit(), y.core(0), a.core(0), v.core(0));
        let psi1 = frame_right(&Frame::unit(), y.core(2), a.core(2), v.core(2));
        let loc = local_apply(&phi1, a.core(1), v.core(1), &psi1);
        let got: f64 = loc.iter().zip(y.core(1).data()).map(|(p, q)| p * q).sum();
        assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }
}
