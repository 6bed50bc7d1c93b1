use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::linalg::{choose_rank, svd_thin};
use super::tensor::{Core, TTTensor};
use crate::error::{Error, Result};
use crate::numkit::blas::{matmul, norm2};

/// Accuracy and rank budget for TT rounding.
///
/// The admissible error is `max(abs_tol, rel_tol * ||X||)`, measured in the
/// Euclidean norm of the discarded part; `max_rank` caps every interior rank
/// and takes precedence over the tolerance when both bind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub abs_tol: f64,
    #[serde(default)]
    pub rel_tol: f64,
    pub max_rank: usize,
}

impl TruncationPolicy {
    pub fn absolute(abs_tol: f64, max_rank: usize) -> Self {
        Self { abs_tol, rel_tol: 0.0, max_rank }
    }

    pub fn relative(rel_tol: f64, max_rank: usize) -> Self {
        Self { abs_tol: 0.0, rel_tol, max_rank }
    }

    /// No accuracy loss beyond round-off and no rank cap.
    pub fn exact() -> Self {
        Self { abs_tol: 0.0, rel_tol: 0.0, max_rank: usize::MAX }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol >= 0.0) || !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("truncation tolerances must be >= 0, got {self:?}")));
        }
        if self.max_rank == 0 {
            return Err(Error::InvalidArgument("max_rank must be >= 1".into()));
        }
        Ok(())
    }

    pub fn tolerance_for(&self, norm: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * norm)
    }
}

/// Outcome details of a rounding pass.
#[derive(Clone, Debug, Default)]
pub struct TruncationInfo {
    /// Upper bound on `||X - round(X)||` from the discarded singular values.
    pub error_bound: f64,
    /// True when some bond was cut by the rank cap rather than the tolerance.
    pub rank_capped: bool,
}

impl TTTensor {
    /// TT-SVD rounding. Per-bond tolerance is `tol / sqrt(d - 1)` so the total
    /// error stays below `tol` unless the rank cap binds. The result is
    /// left-orthogonal with the norm carried by the last core.
    pub fn truncate(&self, policy: &TruncationPolicy) -> TTTensor {
        self.truncate_with_info(policy).0
    }

    pub fn truncate_with_info(&self, policy: &TruncationPolicy) -> (TTTensor, TruncationInfo) {
        let d = self.d();
        let mut x = self.orthogonalize(0);
        let norm = norm2(x.core(0).data());
        let mut info = TruncationInfo::default();
        if d == 1 {
            return (x, info);
        }
        let tol = policy.tolerance_for(norm);
        let delta = tol / ((d - 1) as f64).sqrt();
        let mut sq_err = 0.0;
        for k in 0..d - 1 {
            let c = x.core(k).clone();
            let (l, n, r) = (c.left(), c.mode(), c.right());
            let svd = svd_thin(l * n, r, c.data());
            let (keep, tail) = choose_rank(&svd.s, delta, policy.max_rank);
            let (unconstrained, _) = choose_rank(&svd.s, delta, usize::MAX);
            if keep < unconstrained {
                info.rank_capped = true;
            }
            sq_err += tail * tail;
            let mut u = Vec::with_capacity(l * n * keep);
            for row in 0..l * n {
                u.extend_from_slice(&svd.u[row * svd.p..row * svd.p + keep]);
            }
            let mut svt = svd.vt[..keep * r].to_vec();
            for (p, s) in svd.s.iter().take(keep).enumerate() {
                svt[p * r..(p + 1) * r].iter_mut().for_each(|v| *v *= s);
            }
            let next = x.core(k + 1);
            let nd = matmul(&svt, false, next.data(), false, keep, r, next.mode() * next.right());
            let next = Core::from_parts(keep, next.mode(), next.right(), nd);
            x.set_pair(k, Core::from_parts(l, n, keep, u), next);
        }
        x.set_orth_tags(d - 1, 0);
        info.error_bound = sq_err.sqrt();
        (x, info)
    }

    /// TT-SVD of a dense tensor given with the first mode fastest.
    pub fn from_dense(data: &[f64], modes: &[usize], policy: &TruncationPolicy) -> Result<TTTensor> {
        if modes.is_empty() || modes.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid mode sizes {modes:?}")));
        }
        let total: usize = modes.iter().product();
        if total != data.len() {
            return Err(Error::DimensionMismatch(format!("{} entries for modes {modes:?}", data.len())));
        }
        let d = modes.len();
        let tol = policy.tolerance_for(norm2(data));
        let delta = if d > 1 { tol / ((d - 1) as f64).sqrt() } else { 0.0 };
        let mut cores = Vec::with_capacity(d);
        // remainder in column-major layout: rows = (rank, mode) with rank fastest
        let mut rem = data.to_vec();
        let mut rank = 1usize;
        let mut rest = total;
        for (k, &n) in modes.iter().enumerate() {
            rest /= n;
            if k + 1 == d {
                let mut c = Core::zeros(rank, n, 1);
                for i in 0..n {
                    for a in 0..rank {
                        c.data_mut()[a * n + i] = rem[a + rank * i];
                    }
                }
                cores.push(c);
                break;
            }
            let rows = rank * n;
            let mat = DMatrix::from_column_slice(rows, rest, &rem);
            let svd = mat.svd(true, true);
            let u = svd.u.as_ref().expect("u requested");
            let vt = svd.v_t.as_ref().expect("v_t requested");
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&p, &q| svd.singular_values[q].total_cmp(&svd.singular_values[p]));
            let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
            let (keep, _) = choose_rank(&s, delta, policy.max_rank);
            let mut c = Core::zeros(rank, n, keep);
            for (p, &src) in order.iter().take(keep).enumerate() {
                for i in 0..n {
                    for a in 0..rank {
                        c.data_mut()[(a * n + i) * keep + p] = u[(a + rank * i, src)];
                    }
                }
            }
            cores.push(c);
            // new remainder: diag(s) V^T restricted, keep x rest, column-major
            let mut next = vec![0.0; keep * rest];
            for col in 0..rest {
                for (p, &src) in order.iter().take(keep).enumerate() {
                    next[p + keep * col] = svd.singular_values[src] * vt[(src, col)];
                }
            }
            rem = next;
            rank = keep;
        }
        let mut x = TTTensor::from_cores(cores)?;
        x.set_orth_tags(d - 1, 0);
        Ok(x)
    }
}
