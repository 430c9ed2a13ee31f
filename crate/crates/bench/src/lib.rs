//! Shared inputs for the criterion benches.

use linkpoison::graph::{make_split, planted_partition, Graph, LinkSplit, SplitFractions};
use linkpoison::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Entries uniform in `[-1, 1)`.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Two-block planted partition with identity features and a default split.
pub fn fixture(n: usize, seed: u64) -> (Graph, LinkSplit) {
    let g = planted_partition(n, 2, 0.1, 0.005, seed);
    let g = g.clone().with_features(Matrix::identity(n)).unwrap();
    let split = make_split(&g, SplitFractions::default(), seed).unwrap();
    (g, split)
}

/// Scores with random relevance labels, both classes present.
pub fn ranking(len: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = (0..len).map(|_| rng.random::<f64>()).collect();
    let mut labels: Vec<bool> = (0..len).map(|_| rng.random_bool(0.3)).collect();
    labels[0] = true;
    labels[len - 1] = false;
    (scores, labels)
}
