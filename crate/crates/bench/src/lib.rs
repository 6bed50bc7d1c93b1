//! Shared fixtures for the kernel benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttmc_core::{build_model, KroneckerModel, ModelKind, ModelSpec, TTOperator, TTTensor};

pub fn overflow(d: usize, cap: usize) -> KroneckerModel {
    build_model(&ModelSpec::new(ModelKind::Overflow, d, cap)).expect("valid overflow spec")
}

pub fn overflow_operator(d: usize, cap: usize) -> TTOperator {
    overflow(d, cap).to_operator().expect("operator conversion")
}

/// Random tensor with all interior ranks equal to `rank`.
pub fn random_tensor(modes: &[usize], rank: usize, seed: u64) -> TTTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranks = vec![rank; modes.len() - 1];
    TTTensor::random(modes, &ranks, &mut rng).expect("valid shape")
}
