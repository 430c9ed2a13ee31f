use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.85,
            val: 0.05,
            test: 0.10,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config(format!("split fractions must be non-negative: {self:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1: {self:?}")));
        }
        Ok(())
    }
}

/// Positive edges partitioned into train/validation/test, plus sampled
/// non-edges for validation and test. All pairs are stored as `(i, j)` with
/// `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSplit {
    pub train_pos: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
    pub seed: u64,
}

impl LinkSplit {
    /// The graph with every validation and test pair cleared. On the graph
    /// the split was drawn from this removes exactly the held-out positives;
    /// on a modified graph it also hides any edge placed on a held-out
    /// negative.
    pub fn training_graph(&self, g: &Graph) -> Graph {
        let held: Vec<(usize, usize)> = self
            .val_pos
            .iter()
            .chain(&self.val_neg)
            .chain(&self.test_pos)
            .chain(&self.test_neg)
            .copied()
            .collect();
        g.without_edges(&held)
    }

    /// Every validation and test pair, positive or negative.
    pub fn held_out(&self) -> HashSet<(usize, usize)> {
        self.val_pos
            .iter()
            .chain(&self.val_neg)
            .chain(&self.test_pos)
            .chain(&self.test_neg)
            .copied()
            .collect()
    }

    pub fn validation_pairs(&self) -> (Vec<(usize, usize)>, Vec<bool>) {
        labelled(&self.val_pos, &self.val_neg)
    }

    pub fn test_pairs(&self) -> (Vec<(usize, usize)>, Vec<bool>) {
        labelled(&self.test_pos, &self.test_neg)
    }
}

fn labelled(pos: &[(usize, usize)], neg: &[(usize, usize)]) -> (Vec<(usize, usize)>, Vec<bool>) {
    let pairs = pos.iter().chain(neg).copied().collect();
    let labels = std::iter::repeat_n(true, pos.len())
        .chain(std::iter::repeat_n(false, neg.len()))
        .collect();
    (pairs, labels)
}

/// Seeded uniform split of the positive edges. Validation and test negatives
/// are drawn uniformly without replacement from the admissible non-edges.
pub fn make_split(g: &Graph, fractions: SplitFractions, seed: u64) -> Result<LinkSplit> {
    fractions.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = g.edges();
    let m = edges.len();
    edges.shuffle(&mut rng);

    let n_test = ((fractions.test * m as f64).round() as usize).min(m);
    let n_val = ((fractions.val * m as f64).round() as usize).min(m - n_test);
    let test_pos: Vec<_> = edges[..n_test].to_vec();
    let val_pos: Vec<_> = edges[n_test..n_test + n_val].to_vec();
    let mut train_pos: Vec<_> = edges[n_test + n_val..].to_vec();
    train_pos.sort_unstable();

    let negatives = sample_non_edges(g, n_val + n_test, &mut rng)?;
    let (test_neg, val_neg) = negatives.split_at(n_test);
    Ok(LinkSplit {
        train_pos,
        val_pos,
        test_pos,
        val_neg: val_neg.to_vec(),
        test_neg: test_neg.to_vec(),
        seed,
    })
}

fn sample_non_edges(g: &Graph, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = g.n();
    let admissible: usize = match g.bipartite() {
        Some(b) => b.users * b.items,
        None => n * n.saturating_sub(1) / 2,
    };
    let available = admissible - g.edge_count();
    if available < count {
        return Err(Error::Infeasible(format!(
            "need {count} negative pairs but only {available} non-edges exist"
        )));
    }
    if available <= 4 * count {
        // Dense graph: enumerate and shuffle.
        let mut pool: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| g.is_admissible(i, j) && !g.has_edge(i, j))
            .collect();
        pool.shuffle(rng);
        pool.truncate(count);
        return Ok(pool);
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if !g.is_admissible(a, b) || g.has_edge(a, b) {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if seen.insert(pair) {
            out.push(pair);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::erdos_renyi;

    fn hundred_edges() -> Graph {
        let mut edges = Vec::new();
        'outer: for i in 0..40 {
            for j in (i + 1)..40 {
                if (i * 7 + j * 3) % 5 == 0 {
                    edges.push((i, j));
                    if edges.len() == 100 {
                        break 'outer;
                    }
                }
            }
        }
        Graph::from_edges(40, &edges).unwrap()
    }

    #[test]
    fn counts_follow_fractions() {
        let g = hundred_edges();
        assert_eq!(g.edge_count(), 100);
        let s = make_split(&g, SplitFractions::default(), 1).unwrap();
        assert_eq!((s.train_pos.len(), s.val_pos.len(), s.test_pos.len()), (85, 5, 10));
        assert_eq!(s.val_neg.len(), 5);
        assert_eq!(s.test_neg.len(), 10);
    }

    #[test]
    fn deterministic_for_seed() {
        let g = erdos_renyi(30, 0.2, 4);
        let a = make_split(&g, SplitFractions::default(), 9).unwrap();
        let b = make_split(&g, SplitFractions::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn all_train_boundary() {
        let g = erdos_renyi(20, 0.3, 2);
        let f = SplitFractions {
            train: 1.0,
            val: 0.0,
            test: 0.0,
        };
        let s = make_split(&g, f, 0).unwrap();
        assert_eq!(s.train_pos.len(), g.edge_count());
        assert!(s.val_pos.is_empty() && s.test_pos.is_empty());
        assert!(s.val_neg.is_empty() && s.test_neg.is_empty());
    }

    #[test]
    fn sets_are_disjoint_and_negatives_are_non_edges() {
        let g = erdos_renyi(40, 0.15, 3);
        let s = make_split(&g, SplitFractions::default(), 5).unwrap();
        let all: Vec<_> = s
            .train_pos
            .iter()
            .chain(&s.val_pos)
            .chain(&s.test_pos)
            .chain(&s.val_neg)
            .chain(&s.test_neg)
            .collect();
        let unique: HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
        for &(i, j) in s.val_neg.iter().chain(&s.test_neg) {
            assert!(i < j && !g.has_edge(i, j));
        }
    }

    #[test]
    fn too_dense_is_infeasible() {
        let edges: Vec<_> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        let g = Graph::from_edges(5, &edges).unwrap();
        assert!(matches!(
            make_split(&g, SplitFractions::default(), 0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn bad_fractions_rejected() {
        let g = erdos_renyi(10, 0.3, 0);
        let f = SplitFractions {
            train: 0.5,
            val: 0.1,
            test: 0.1,
        };
        assert!(matches!(make_split(&g, f, 0), Err(Error::Config(_))));
    }
}
