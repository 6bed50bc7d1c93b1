use std::collections::VecDeque;

use super::dense::lu_solve_strict;
use super::DenseMatrix;
use crate::error::{Error, Result};

/// Stationary vector of an irreducible chain from its transposed generator
/// `A` (columns sum to zero): solves `A x = 0`, `sum(x) = 1` by replacing
/// the last equation with the normalization row.
pub fn dense_stationary(a: &DenseMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} generator is not square", a.rows(), a.cols())));
    }
    let n = a.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty generator".into()));
    }
    let mut m = a.clone();
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[n - 1] = 1.0;
    match lu_solve_strict(&m, &rhs) {
        Ok(sol) => Ok(sol.x),
        Err(Error::Singular(msg)) => {
            Err(Error::Singular(format!("normalized generator is singular, chain is not irreducible ({msg})")))
        }
        Err(e) => Err(e),
    }
}

/// True iff the directed graph given by out-neighbour lists has exactly one
/// strongly connected component.
pub fn strongly_connected(adjacency: &[Vec<usize>]) -> bool {
    let n = adjacency.len();
    if n <= 1 {
        return true;
    }
    let mut reverse = vec![Vec::new(); n];
    for (from, outs) in adjacency.iter().enumerate() {
        for &to in outs {
            reverse[to].push(from);
        }
    }
    reaches_all(adjacency) && reaches_all(&reverse)
}

fn reaches_all(adjacency: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adjacency.len()
}

/// Strong connectivity of the transition graph of a transposed generator:
/// a nonzero `A[to, from]` off the diagonal is an edge `from -> to`.
pub fn pattern_strongly_connected(a: &DenseMatrix) -> bool {
    let n = a.rows();
    let mut adjacency = vec![Vec::new(); n];
    for to in 0..n {
        for from in 0..n {
            if to != from && a[(to, from)] != 0.0 {
                adjacency[from].push(to);
            }
        }
    }
    strongly_connected(&adjacency)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_balance() {
        // rate 1 for 0 -> 1, rate 2 for 1 -> 0; transposed generator
        let a = DenseMatrix::from_row_major(2, 2, vec![-1.0, 2.0, 1.0, -2.0]).unwrap();
        let x = dense_stationary(&a).unwrap();
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_walk_is_uniform() {
        let a = DenseMatrix::from_fn(3, 3, |i, j| if i == j { -2.0 } else { 1.0 });
        let x = dense_stationary(&a).unwrap();
        for v in x {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reducible_chain_is_rejected() {
        // 0 -> 1 only: state 1 absorbing, state 0 transient
        let a = DenseMatrix::from_row_major(2, 2, vec![-1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(!pattern_strongly_connected(&a));
        // the replaced system is still solvable here (absorbing distribution),
        // so connectivity is the check that flags it
        let x = dense_stationary(&a).unwrap();
        assert!((x[1] - 1.0).abs() < 1e-15);
        // two disconnected absorbing states make the replaced system singular
        let b = DenseMatrix::zeros(3, 3);
        assert!(matches!(dense_stationary(&b), Err(Error::Singular(_))));
    }

    #[test]
    fn connectivity_small_cases() {
        assert!(strongly_connected(&[vec![]]));
        assert!(!strongly_connected(&[vec![1], vec![]]));
        assert!(strongly_connected(&[vec![1], vec![2], vec![0]]));
    }
}
