use serde::{Deserialize, Serialize};

use super::ModelKind;
use crate::error::{Error, Result};
use crate::numkit::{pattern_strongly_connected, DenseMatrix};
use crate::tt::{TTOperator, TTTensor};

/// Largest state count accepted by [`KroneckerModel::assemble_dense`].
pub const DENSE_STATE_LIMIT: usize = 10_000;

/// A square `n x n` factor stored as `(row, col, value)` triplets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseFactor {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseFactor {
    pub fn new(n: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = entries.iter().find(|(i, j, _)| *i >= n || *j >= n) {
            return Err(Error::InvalidModel(format!("entry ({i}, {j}) outside a {n}x{n} factor")));
        }
        let mut f = Self { n, entries };
        f.normalize();
        Ok(f)
    }

    pub fn identity(n: usize) -> Self {
        Self { n, entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut f = Self { n: values.len(), entries: values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect() };
        f.normalize();
        f
    }

    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidModel("factors must be square".into()));
        }
        let mut entries = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != 0.0 {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        Ok(Self { n: m.rows(), entries })
    }

    // sorted row-major, duplicates merged, exact zeros dropped
    fn normalize(&mut self) {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(i, j, v) in &self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);
        self.entries = merged;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn is_identity(&self) -> bool {
        self.entries.len() == self.n && self.entries.iter().all(|&(i, j, v)| i == j && v == 1.0)
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for &(_, j, v) in &self.entries {
            s[j] += v;
        }
        s
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut f = Self { n: self.n, entries: self.entries.iter().map(|&(i, j, v)| (i, j, alpha * v)).collect() };
        f.normalize();
        f
    }

    /// `Q F P` for restriction `Q` (`m x n`) and interpolation `P` (`n x m`).
    pub fn galerkin(&self, q: &DenseMatrix, p: &DenseMatrix) -> Result<Self> {
        let qf = q.matmul(&self.to_dense())?;
        Self::from_dense(&qf.matmul(p)?)
    }
}

/// One Kronecker product `E_1 (x) ... (x) E_d`, factor `k` acting on mode `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KroneckerTerm {
    factors: Vec<SparseFactor>,
}

impl KroneckerTerm {
    pub fn new(factors: Vec<SparseFactor>) -> Self {
        Self { factors }
    }

    pub fn factors(&self) -> &[SparseFactor] {
        &self.factors
    }

    /// The single non-identity mode, if the term acts on one mode only.
    pub fn local_mode(&self) -> Option<usize> {
        let mut it = self.factors.iter().enumerate().filter(|(_, f)| !f.is_identity());
        match (it.next(), it.next()) {
            (Some((k, _)), None) => Some(k),
            _ => None,
        }
    }
}

/// Transposed generator `A = sum_t E_1^t (x) ... (x) E_d^t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KroneckerModel {
    modes: Vec<usize>,
    terms: Vec<KroneckerTerm>,
    kind: Option<ModelKind>,
}

impl KroneckerModel {
    pub fn new(modes: Vec<usize>, terms: Vec<KroneckerTerm>, kind: Option<ModelKind>) -> Result<Self> {
        if modes.is_empty() || modes.contains(&0) {
            return Err(Error::InvalidModel(format!("invalid mode sizes {modes:?}")));
        }
        if terms.is_empty() {
            return Err(Error::InvalidModel("a model needs at least one term".into()));
        }
        for (t, term) in terms.iter().enumerate() {
            if term.factors.len() != modes.len() {
                return Err(Error::InvalidModel(format!(
                    "term {t} has {} factors for {} modes",
                    term.factors.len(),
                    modes.len()
                )));
            }
            for (k, f) in term.factors.iter().enumerate() {
                if f.n != modes[k] {
                    return Err(Error::InvalidModel(format!(
                        "term {t} factor {k} is {0}x{0} but mode {k} has size {1}",
                        f.n, modes[k]
                    )));
                }
            }
        }
        Ok(Self { modes, terms, kind })
    }

    pub fn d(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn terms(&self) -> &[KroneckerTerm] {
        &self.terms
    }

    pub fn kind(&self) -> Option<ModelKind> {
        self.kind
    }

    pub fn states(&self) -> usize {
        self.modes.iter().product()
    }

    pub fn to_operator(&self) -> Result<TTOperator> {
        TTOperator::from_kronecker(self)
    }

    /// Sum of the terms that act on mode `k` alone: the local dynamics of
    /// subsystem `k`.
    pub fn local_operator(&self, k: usize) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.modes[k], self.modes[k]);
        for term in &self.terms {
            if term.local_mode() == Some(k) {
                for &(i, j, v) in term.factors[k].entries() {
                    m[(i, j)] += v;
                }
            }
        }
        m
    }

    /// Coarse model with factors `Q_k E_k^t P_k`, term by term.
    pub fn galerkin(&self, restrict: &[DenseMatrix], interp: &[DenseMatrix]) -> Result<KroneckerModel> {
        if restrict.len() != self.d() || interp.len() != self.d() {
            return Err(Error::DimensionMismatch("one transfer factor per mode is required".into()));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let factors = t
                    .factors
                    .iter()
                    .enumerate()
                    .map(|(k, f)| f.galerkin(&restrict[k], &interp[k]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(KroneckerTerm { factors })
            })
            .collect::<Result<Vec<_>>>()?;
        let modes = interp.iter().map(|p| p.cols()).collect();
        KroneckerModel::new(modes, terms, self.kind)
    }

    /// Dense `A` in first-mode-fastest ordering.
    pub fn assemble_dense(&self) -> Result<DenseMatrix> {
        let n = self.states();
        if n > DENSE_STATE_LIMIT {
            return Err(Error::SizeGuard(format!("{n} states exceed the dense limit of {DENSE_STATE_LIMIT}")));
        }
        let mut a = DenseMatrix::zeros(n, n);
        for term in &self.terms {
            // kron(E_d, ..., E_1) puts mode 1 fastest
            let mut m = term.factors[self.d() - 1].to_dense();
            for f in term.factors.iter().rev().skip(1) {
                m = m.kron(&f.to_dense());
            }
            a = a.add(&m)?;
        }
        Ok(a)
    }

    /// Column-sum, sign and connectivity checks of the generator.
    pub fn validate(&self) -> Result<ValidationReport> {
        let op = self.to_operator()?;
        let ones = TTTensor::ones(&self.modes)?;
        let scale = op.frobenius_norm().max(f64::MIN_POSITIVE);
        let column_sum_defect = op.transpose().apply(&ones)?.norm() / scale;
        let mut report = ValidationReport {
            states: self.states(),
            terms: self.terms.len(),
            column_sum_defect,
            negativity_defect: None,
            strongly_connected: None,
        };
        if self.states() <= DENSE_STATE_LIMIT {
            let a = self.assemble_dense()?;
            let mut worst = 0.0f64;
            for i in 0..a.rows() {
                for j in 0..a.cols() {
                    if i != j {
                        worst = worst.max(-a[(i, j)]);
                    }
                }
            }
            report.negativity_defect = Some(worst);
            report.strongly_connected = Some(pattern_strongly_connected(&a));
        }
        Ok(report)
    }
}

/// Result of [`KroneckerModel::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub states: usize,
    pub terms: usize,
    /// `||A^T 1|| / ||A||_F`; zero for an exact transposed generator.
    pub column_sum_defect: f64,
    /// Largest magnitude of a negative off-diagonal entry (small models only).
    pub negativity_defect: Option<f64>,
    pub strongly_connected: Option<bool>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.column_sum_defect <= 1e-12
            && self.negativity_defect.is_none_or(|v| v == 0.0)
            && self.strongly_connected != Some(false)
    }
}
