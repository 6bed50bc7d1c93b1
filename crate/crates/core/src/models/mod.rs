//! Benchmark Markov chains as sums of Kronecker terms.
//!
//! Every physical transition contributes an off-diagonal term with
//! nonnegative factors plus a matching diagonal term
//! `-rate * diag(colsum O_1) (x) ... (x) diag(colsum O_d)`, so each pair has
//! zero column sums on its own. Transitions touching one subsystem only are
//! merged into a single local term per mode.

mod kron;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

pub use kron::{KroneckerModel, KroneckerTerm, SparseFactor, ValidationReport, DENSE_STATE_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Overflow,
    OverflowSim,
    OverflowPerSim,
    KanbanAlt2,
    DirectedMetab,
    DivergingMetab,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Overflow,
        ModelKind::OverflowSim,
        ModelKind::OverflowPerSim,
        ModelKind::KanbanAlt2,
        ModelKind::DirectedMetab,
        ModelKind::DivergingMetab,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Overflow => "overflow",
            ModelKind::OverflowSim => "overflowsim",
            ModelKind::OverflowPerSim => "overflowpersim",
            ModelKind::KanbanAlt2 => "kanbanalt2",
            ModelKind::DirectedMetab => "directedmetab",
            ModelKind::DivergingMetab => "divergingmetab",
        }
    }

    /// Queueing models whose every subsystem has its own birth-death dynamics.
    pub fn is_overflow_family(self) -> bool {
        matches!(self, ModelKind::Overflow | ModelKind::OverflowSim | ModelKind::OverflowPerSim)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidModel(format!("unknown model kind {s:?}")))
    }
}

/// Model description as read from a JSON spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub d: usize,
    /// Capacity of every subsystem; mode sizes are `cap + 1`.
    pub cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_node: Option<usize>,
    /// Arrival rates per queue (overflow family).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    /// Service rates per queue (overflow family).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    /// Departure rates per stage (kanban).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dep: Option<Vec<f64>>,
    /// Maximal reaction rate (metabolic models).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    /// Half-saturation offset (metabolic models).
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// External arrival rate into the first subsystem (kanban, metabolic).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inflow: Option<f64>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, d: usize, cap: usize) -> Self {
        Self { kind, d, cap, branch_node: None, lambda: None, mu: None, dep: None, v: None, k: None, inflow: None }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))
    }

    pub fn modes(&self) -> Vec<usize> {
        vec![self.cap + 1; self.d]
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidModel(format!("d must be >= 2, got {}", self.d)));
        }
        if self.cap < 1 {
            return Err(Error::InvalidModel("cap must be >= 1".into()));
        }
        for (name, list) in [("lambda", &self.lambda), ("mu", &self.mu), ("dep", &self.dep)] {
            if let Some(l) = list {
                if l.len() != self.d {
                    return Err(Error::InvalidModel(format!("{name} needs {} rates, got {}", self.d, l.len())));
                }
                if l.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                    return Err(Error::InvalidModel(format!("{name} rates must be finite and >= 0")));
                }
            }
        }
        for (name, val) in [("v", self.v), ("K", self.k), ("inflow", self.inflow)] {
            if let Some(x) = val {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::InvalidModel(format!("{name} must be finite and >= 0")));
                }
            }
        }
        if let Some(k) = self.k {
            if k < 1.0 {
                return Err(Error::InvalidModel("K must be >= 1".into()));
            }
        }
        if let Some(b) = self.branch_node {
            if self.kind != ModelKind::DivergingMetab {
                return Err(Error::InvalidModel("branch_node only applies to divergingmetab".into()));
            }
            if b < 1 || b + 2 > self.d {
                return Err(Error::InvalidModel(format!("branch_node must lie in 1..={}, got {b}", self.d.saturating_sub(2))));
            }
        }
        Ok(())
    }

    fn lambdas(&self) -> Vec<f64> {
        self.lambda.clone().unwrap_or_else(|| (0..self.d).map(|k| 1.2 - 0.1 * k as f64).collect())
    }

    fn mus(&self) -> Vec<f64> {
        self.mu.clone().unwrap_or_else(|| vec![1.0; self.d])
    }

    fn deps(&self) -> Vec<f64> {
        self.dep.clone().unwrap_or_else(|| vec![1.0; self.d])
    }

    /// Trunk length and the two branch lengths of the diverging pathway.
    pub fn diverging_layout(&self) -> (usize, usize, usize) {
        let b = self.branch_node.unwrap_or(if self.d >= 4 { 2 } else { 1 });
        let rest = self.d - b;
        (b, rest.div_ceil(2), rest / 2)
    }
}

struct Builder {
    modes: Vec<usize>,
    local: Vec<DenseMatrix>,
    terms: Vec<KroneckerTerm>,
}

impl Builder {
    fn new(modes: Vec<usize>) -> Self {
        let local = modes.iter().map(|&n| DenseMatrix::zeros(n, n)).collect();
        Self { modes, local, terms: Vec::new() }
    }

    /// Adds a transition that changes (or conditions on) the given modes
    /// simultaneously; `parts` are nonnegative off-diagonal or indicator factors.
    fn transition(&mut self, rate: f64, parts: &[(usize, SparseFactor)]) {
        if rate == 0.0 {
            return;
        }
        if let [(k, f)] = parts {
            let m = &mut self.local[*k];
            for &(i, j, v) in f.entries() {
                m[(i, j)] += rate * v;
            }
            for (j, s) in f.col_sums().into_iter().enumerate() {
                m[(j, j)] -= rate * s;
            }
            return;
        }
        let mut off: Vec<SparseFactor> = self.modes.iter().map(|&n| SparseFactor::identity(n)).collect();
        let mut diag = off.clone();
        for (k, f) in parts {
            off[*k] = f.clone();
            diag[*k] = SparseFactor::diag(&f.col_sums());
        }
        let first = parts[0].0;
        off[first] = off[first].scaled(rate);
        diag[first] = diag[first].scaled(-rate);
        self.terms.push(KroneckerTerm::new(off));
        self.terms.push(KroneckerTerm::new(diag));
    }

    fn finish(self, kind: ModelKind) -> Result<KroneckerModel> {
        let d = self.modes.len();
        let mut terms = Vec::with_capacity(d + self.terms.len());
        for (k, m) in self.local.iter().enumerate() {
            if m.max_abs() == 0.0 {
                continue;
            }
            let mut factors: Vec<SparseFactor> = self.modes.iter().map(|&n| SparseFactor::identity(n)).collect();
            factors[k] = SparseFactor::from_dense(m)?;
            terms.push(KroneckerTerm::new(factors));
        }
        terms.extend(self.terms);
        KroneckerModel::new(self.modes, terms, Some(kind))
    }
}

/// `B[s+1, s] = 1`: one arrival (transposed orientation).
fn birth(n: usize) -> SparseFactor {
    SparseFactor::new(n, (0..n - 1).map(|s| (s + 1, s, 1.0)).collect()).expect("in range")
}

/// `D[s-1, s] = rate(s)`: one departure at occupancy-dependent rate.
fn death(n: usize, rate: impl Fn(usize) -> f64) -> SparseFactor {
    SparseFactor::new(n, (1..n).map(|s| (s - 1, s, rate(s))).collect()).expect("in range")
}

/// Indicator of the full state.
fn full(n: usize) -> SparseFactor {
    SparseFactor::new(n, vec![(n - 1, n - 1, 1.0)]).expect("in range")
}

pub fn build_model(spec: &ModelSpec) -> Result<KroneckerModel> {
    spec.validate()?;
    let d = spec.d;
    let n = spec.cap + 1;
    let mut b = Builder::new(spec.modes());
    match spec.kind {
        ModelKind::Overflow | ModelKind::OverflowSim | ModelKind::OverflowPerSim => {
            let lam = spec.lambdas();
            let mu = spec.mus();
            for k in 0..d {
                b.transition(lam[k], &[(k, birth(n))]);
                b.transition(mu[k], &[(k, death(n, |_| 1.0))]);
            }
            for j in 0..d {
                let last = if spec.kind == ModelKind::Overflow { d - 1 } else { (j + 1).min(d - 1) };
                for m in j + 1..=last {
                    let mut parts: Vec<(usize, SparseFactor)> = (j..m).map(|q| (q, full(n))).collect();
                    parts.push((m, birth(n)));
                    b.transition(lam[j], &parts);
                }
            }
            if spec.kind == ModelKind::OverflowPerSim {
                b.transition(lam[d - 1], &[(0, birth(n)), (d - 1, full(n))]);
            }
        }
        ModelKind::KanbanAlt2 => {
            let dep = spec.deps();
            b.transition(spec.inflow.unwrap_or(1.2), &[(0, birth(n))]);
            for k in 0..d - 1 {
                b.transition(dep[k], &[(k, death(n, |_| 1.0)), (k + 1, birth(n))]);
            }
            b.transition(dep[d - 1], &[(d - 1, death(n, |_| 1.0))]);
        }
        ModelKind::DirectedMetab | ModelKind::DivergingMetab => {
            let v = spec.v.unwrap_or(0.1);
            let kk = spec.k.unwrap_or(1000.0);
            let law = move |m: usize| metabolic_rate(v, kk, m);
            let convert = |b: &mut Builder, from: usize, to: usize| {
                b.transition(1.0, &[(from, death(n, law)), (to, birth(n))]);
            };
            let outflow = |b: &mut Builder, from: usize| b.transition(1.0, &[(from, death(n, law))]);
            b.transition(spec.inflow.unwrap_or(v), &[(0, birth(n))]);
            let (trunk, len1, len2) = if spec.kind == ModelKind::DirectedMetab {
                (d, 0, 0)
            } else {
                spec.diverging_layout()
            };
            for k in 0..trunk - 1 {
                convert(&mut b, k, k + 1);
            }
            if len1 + len2 == 0 {
                outflow(&mut b, trunk - 1);
            }
            let mut start = trunk;
            for len in [len1, len2] {
                if len == 0 {
                    continue;
                }
                convert(&mut b, trunk - 1, start);
                for k in start..start + len - 1 {
                    convert(&mut b, k, k + 1);
                }
                outflow(&mut b, start + len - 1);
                start += len;
            }
        }
    }
    b.finish(spec.kind)
}

/// Reaction rate `v m / (m + K - 1)` of the metabolic models at occupancy `m`.
pub fn metabolic_rate(v: f64, k: f64, m: usize) -> f64 {
    v * m as f64 / (m as f64 + k - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::dense_stationary;

    fn idx(x1: usize, x2: usize) -> usize {
        x1 + 2 * x2
    }

    #[test]
    fn overflow_two_queues_by_hand() {
        let model = build_model(&ModelSpec::new(ModelKind::Overflow, 2, 1)).unwrap();
        let a = model.assemble_dense().unwrap();
        // generator entries q[from][to]
        let mut q = DenseMatrix::zeros(4, 4);
        for x2 in 0..2 {
            q[(idx(0, x2), idx(1, x2))] += 1.2;
            q[(idx(1, x2), idx(0, x2))] += 1.0;
        }
        for x1 in 0..2 {
            q[(idx(x1, 0), idx(x1, 1))] += 1.1;
            q[(idx(x1, 1), idx(x1, 0))] += 1.0;
        }
        q[(idx(1, 0), idx(1, 1))] += 1.2;
        for i in 0..4 {
            let s: f64 = (0..4).map(|j| q[(i, j)]).sum();
            q[(i, i)] = -s;
        }
        let expect = q.transpose();
        for i in 0..4 {
            for j in 0..4 {
                assert!((a[(i, j)] - expect[(i, j)]).abs() < 1e-14, "({i},{j})");
            }
        }
        assert!(a.col_sums().iter().all(|s| s.abs() < 1e-14));
    }

    #[test]
    fn kanban_blocks_service_into_full_queue() {
        let model = build_model(&ModelSpec::new(ModelKind::KanbanAlt2, 2, 1)).unwrap();
        let a = model.assemble_dense().unwrap();
        let from = idx(1, 1);
        assert_eq!(a[(idx(0, 1), from)], 0.0);
        assert_eq!(a[(idx(1, 0), from)], 1.0);
        assert!((a[(from, from)] + 1.0).abs() < 1e-15);
        // service of queue 1 happens when queue 2 has room
        assert_eq!(a[(idx(0, 1), idx(1, 0))], 1.0);
    }

    #[test]
    fn metabolic_rate_law() {
        assert!((metabolic_rate(0.1, 1000.0, 1) - 1e-4).abs() < 1e-18);
        let model = build_model(&ModelSpec::new(ModelKind::DirectedMetab, 2, 3)).unwrap();
        let a = model.assemble_dense().unwrap();
        // outflow from substrate 2 at occupancy 1, substrate 1 empty
        assert!((a[(0, 4)] - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn all_kinds_are_valid_generators() {
        for kind in ModelKind::ALL {
            for d in [2, 3] {
                for cap in [1, 2] {
                    let model = build_model(&ModelSpec::new(kind, d, cap)).unwrap();
                    let report = model.validate().unwrap();
                    assert!(report.passed(), "{kind} d={d} cap={cap}: {report:?}");
                    let x = dense_stationary(&model.assemble_dense().unwrap()).unwrap();
                    assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    assert!(x.iter().all(|v| *v >= -1e-12));
                }
            }
        }
    }

    #[test]
    fn term_counts() {
        let t = |kind, d| build_model(&ModelSpec::new(kind, d, 2)).unwrap().terms().len();
        // local terms plus one off/diagonal pair per coupling
        assert_eq!(t(ModelKind::Overflow, 4), 4 + 2 * 6);
        assert_eq!(t(ModelKind::OverflowSim, 4), 4 + 2 * 3);
        assert_eq!(t(ModelKind::OverflowPerSim, 4), 4 + 2 * 4);
        assert_eq!(t(ModelKind::KanbanAlt2, 4), 2 + 2 * 3);
        assert_eq!(t(ModelKind::DirectedMetab, 4), 2 + 2 * 3);
        assert_eq!(t(ModelKind::DivergingMetab, 6), 3 + 2 * 5);
    }

    #[test]
    fn diverging_layout_rules() {
        let mut spec = ModelSpec::new(ModelKind::DivergingMetab, 6, 1);
        assert_eq!(spec.diverging_layout(), (2, 2, 2));
        spec.d = 7;
        assert_eq!(spec.diverging_layout(), (2, 3, 2));
        spec.d = 3;
        assert_eq!(spec.diverging_layout(), (1, 1, 1));
        spec.d = 2;
        assert_eq!(spec.diverging_layout(), (1, 1, 0));
        let diverging = build_model(&spec).unwrap().assemble_dense().unwrap();
        let directed = build_model(&ModelSpec::new(ModelKind::DirectedMetab, 2, 1)).unwrap().assemble_dense().unwrap();
        assert_eq!(diverging, directed);
        spec.d = 5;
        spec.branch_node = Some(4);
        assert!(build_model(&spec).is_err());
    }

    #[test]
    fn broken_model_is_flagged() {
        let model = build_model(&ModelSpec::new(ModelKind::Overflow, 2, 2)).unwrap();
        let mut terms = model.terms().to_vec();
        let flipped: Vec<SparseFactor> = terms[0].factors().iter().cloned().collect();
        terms[0] = KroneckerTerm::new(vec![flipped[0].scaled(-1.0), flipped[1].clone()]);
        let broken = KroneckerModel::new(model.modes().to_vec(), terms, None).unwrap();
        let r = broken.validate().unwrap();
        assert!(r.negativity_defect.unwrap() > 0.0);
        assert!(!r.passed());
    }

    #[test]
    fn zero_arrivals_break_irreducibility() {
        let mut spec = ModelSpec::new(ModelKind::KanbanAlt2, 3, 1);
        spec.inflow = Some(0.0);
        let r = build_model(&spec).unwrap().validate().unwrap();
        assert_eq!(r.strongly_connected, Some(false));
        let per = build_model(&ModelSpec::new(ModelKind::OverflowPerSim, 3, 1)).unwrap();
        assert_eq!(per.validate().unwrap().strongly_connected, Some(true));
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"kind": "divergingmetab", "d": 5, "cap": 3, "branch_node": 2, "K": 500, "v": 0.2}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        assert_eq!(spec.kind, ModelKind::DivergingMetab);
        assert_eq!(spec.k, Some(500.0));
        let again = ModelSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, again);
        assert!(ModelSpec::from_json(r#"{"kind": "nope", "d": 2, "cap": 1}"#).is_err());
        assert_eq!("OverflowSim".parse::<ModelKind>().unwrap(), ModelKind::OverflowSim);
    }

    #[test]
    fn builds_are_deterministic() {
        let spec = ModelSpec::new(ModelKind::Overflow, 4, 3);
        assert_eq!(build_model(&spec).unwrap(), build_model(&spec).unwrap());
    }
}
