//! Shared fixtures for the criterion benchmarks.

use paircall::mcmc::{FlatKernel, Kernel, SweepStats, TreeKernel};
use paircall::simulate::{generate, SimSpec};
use paircall::{Hyperparams, ReadCounts, TreeHyper};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn sim1_counts() -> ReadCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    generate(&SimSpec::sim1(), &mut rng).unwrap().0
}

pub fn flat_fixture(c: usize) -> (FlatKernel, paircall::mcmc::FlatState, ChaCha8Rng) {
    let counts = Arc::new(sim1_counts());
    let kernel = FlatKernel::new(counts, Hyperparams::default(), c, false, 0.2, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let state = kernel.init_state(&mut rng).unwrap();
    (kernel, state, rng)
}

pub fn tree_fixture() -> (TreeKernel, paircall::mcmc::TreeState, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (counts, truth) = generate(&SimSpec::tree2(50), &mut rng).unwrap();
    let kernel = TreeKernel::new(
        Arc::new(counts),
        TreeHyper::default(),
        truth.tree.unwrap(),
        0.2,
        0.1,
    );
    let state = kernel.init_state(&mut rng).unwrap();
    (kernel, state, rng)
}

pub fn stats() -> SweepStats {
    SweepStats::default()
}
