//! Seeded synthetic graphs used as fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bipartite, Graph};

/// `n` nodes split into `blocks` contiguous, near-equal blocks; pairs inside a
/// block connect with probability `p_in`, pairs across blocks with `p_out`.
/// Node labels are block ids.
pub fn planted_partition(n: usize, blocks: usize, p_in: f64, p_out: f64, seed: u64) -> Graph {
    let blocks = blocks.max(1);
    let label = |v: usize| v * blocks / n.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if label(i) == label(j) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                g.set_edge(i, j, true);
            }
        }
    }
    let labels = (0..n).map(label).collect();
    g.with_labels(labels).expect("one label per node")
}

pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                g.set_edge(i, j, true);
            }
        }
    }
    g
}

/// Random user/item interaction graph; each user-item pair is linked with
/// probability `p`.
pub fn random_bipartite(users: usize, items: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(users + items);
    for u in 0..users {
        for i in 0..items {
            if rng.random::<f64>() < p {
                g.set_edge(u, users + i, true);
            }
        }
    }
    g.with_bipartite(Bipartite { users, items })
        .expect("edges only cross the partition")
}
