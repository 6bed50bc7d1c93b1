//! Randomized invariants of the TT kernels checked against dense arithmetic.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttmc_core::{DenseMatrix, TTOperator, TTTensor, TruncationPolicy};

fn shape() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, u64)> {
    (2usize..=4).prop_flat_map(|d| {
        (
            prop::collection::vec(2usize..=6, d),
            prop::collection::vec(1usize..=5, d - 1),
            any::<u64>(),
        )
    })
}

fn dense_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Dense Kronecker product `A_d kron ... kron A_1` matching first-mode-fastest order.
fn kron_reversed(factors: &[DenseMatrix]) -> DenseMatrix {
    let mut out = factors[0].clone();
    for f in &factors[1..] {
        out = f.kron(&out);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn add_scale_inner_norm_match_dense((modes, ranks, seed) in shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = TTTensor::random(&modes, &ranks, &mut rng).unwrap();
        let y = TTTensor::random(&modes, &ranks, &mut rng).unwrap();
        let xd = x.to_dense().unwrap();
        let yd = y.to_dense().unwrap();
        let scale = 1.0 + dense_norm(&xd) + dense_norm(&yd);

        let s = x.add(&y).unwrap();
        let sd: Vec<f64> = xd.iter().zip(&yd).map(|(a, b)| a + b).collect();
        prop_assert!(max_diff(&s.to_dense().unwrap(), &sd) <= 1e-12 * scale);
        let (rx, ry, rs) = (x.ranks(), y.ranks(), s.ranks());
        let d = modes.len();
        prop_assert!(rs[0] == 1 && rs[d] == 1);
        for k in 1..d {
            prop_assert_eq!(rs[k], rx[k] + ry[k]);
        }

        let z = x.scale(-2.5);
        let zd: Vec<f64> = xd.iter().map(|a| -2.5 * a).collect();
        prop_assert!(max_diff(&z.to_dense().unwrap(), &zd) <= 1e-12 * scale);

        let inner: f64 = xd.iter().zip(&yd).map(|(a, b)| a * b).sum();
        prop_assert!((x.inner(&y).unwrap() - inner).abs() <= 1e-12 * scale * scale);
        prop_assert!((x.norm() - dense_norm(&xd)).abs() <= 1e-12 * scale);
        prop_assert!((x.sum() - xd.iter().sum::<f64>()).abs() <= 1e-12 * scale * (xd.len() as f64).sqrt());
    }

    #[test]
    fn apply_matches_dense((modes, ranks, seed) in shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = TTTensor::random(&modes, &ranks, &mut rng).unwrap();
        let factors: Vec<DenseMatrix> = modes
            .iter()
            .map(|&n| DenseMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let op = TTOperator::from_factors(&factors).unwrap();
        let y = op.apply(&x).unwrap().to_dense().unwrap();
        let xd = x.to_dense().unwrap();
        let expect = kron_reversed(&factors).matvec(&xd).unwrap();
        let scale = 1.0 + dense_norm(&expect);
        prop_assert!(max_diff(&y, &expect) <= 1e-12 * scale);
        prop_assert!(max_diff(&op.to_dense().unwrap().matvec(&xd).unwrap(), &expect) <= 1e-12 * scale);
    }

    #[test]
    fn orthogonalization_keeps_values((modes, ranks, seed) in shape(), pick in any::<prop::sample::Index>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = TTTensor::random(&modes, &ranks, &mut rng).unwrap();
        let c = pick.index(modes.len());
        let y = x.orthogonalize(c);
        let xd = x.to_dense().unwrap();
        prop_assert!(max_diff(&y.to_dense().unwrap(), &xd) <= 1e-12 * (1.0 + dense_norm(&xd)));
        prop_assert_eq!(y.center(), Some(c));
        prop_assert!(y.orthogonality_defect() <= 1e-12);
    }

    #[test]
    fn truncation_respects_bound_and_cap(
        (modes, ranks, seed) in shape(),
        rel in 1e-6f64..0.5,
        cap in 1usize..=5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = TTTensor::random(&modes, &ranks, &mut rng).unwrap();
        let xd = x.to_dense().unwrap();
        let norm = dense_norm(&xd);

        let (y, info) = x.truncate_with_info(&TruncationPolicy::relative(rel, usize::MAX));
        let err = dense_norm(&xd.iter().zip(y.to_dense().unwrap()).map(|(a, b)| a - b).collect::<Vec<_>>());
        prop_assert!(err <= rel * norm * (1.0 + 1e-10) + 1e-12 * norm);
        prop_assert!(err <= info.error_bound * (1.0 + 1e-10) + 1e-12 * norm);
        prop_assert!(y.ranks().iter().zip(x.ranks()).all(|(a, b)| *a <= b));

        let capped = x.truncate(&TruncationPolicy::relative(rel, cap));
        prop_assert!(capped.max_rank() <= cap);
    }
}
