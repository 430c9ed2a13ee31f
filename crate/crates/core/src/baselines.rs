//! Budget-matched reference perturbations.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edit, EditAction, EditList, Graph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    RandomFlip,
    Dice,
    NullModel,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::RandomFlip, BaselineKind::Dice, BaselineKind::NullModel];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::RandomFlip => "random-flip",
            BaselineKind::Dice => "dice",
            BaselineKind::NullModel => "null-model",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline `{s}`")))
    }
}

fn allowed(g: &Graph, forbidden: Option<&HashSet<(usize, usize)>>, i: usize, j: usize) -> bool {
    g.is_admissible(i, j) && !forbidden.is_some_and(|f| f.contains(&(i.min(j), i.max(j))))
}

fn pairs(g: &Graph, forbidden: Option<&HashSet<(usize, usize)>>) -> Vec<(usize, usize)> {
    let n = g.n();
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| allowed(g, forbidden, i, j))
        .collect()
}

/// `budget` distinct admissible pairs drawn uniformly; edges are removed and
/// non-edges added.
pub fn random_flip(
    g: &Graph,
    budget: usize,
    seed: u64,
    forbidden: Option<&HashSet<(usize, usize)>>,
) -> Result<EditList> {
    let pool = pairs(g, forbidden);
    if budget > pool.len() {
        return Err(Error::Infeasible(format!(
            "random flip budget {budget} exceeds the {} admissible pairs",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edits = index::sample(&mut rng, pool.len(), budget)
        .into_iter()
        .map(|k| {
            let (i, j) = pool[k];
            let action = if g.has_edge(i, j) {
                EditAction::Remove
            } else {
                EditAction::Add
            };
            Edit::new(i, j, action, 0.0)
        })
        .collect();
    Ok(EditList::from_edits(edits, budget))
}

/// Disconnect internally, connect externally: each step tosses a fair coin
/// between removing an intra-label edge and adding an inter-label non-edge,
/// falling back to the other pool when one is exhausted.
pub fn dice(
    g: &Graph,
    budget: usize,
    seed: u64,
    forbidden: Option<&HashSet<(usize, usize)>>,
) -> Result<EditList> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::Unsupported("DICE needs node labels".into()))?;
    let (mut removable, mut addable): (Vec<_>, Vec<_>) = (Vec::new(), Vec::new());
    for (i, j) in pairs(g, forbidden) {
        let same = labels[i] == labels[j];
        match (g.has_edge(i, j), same) {
            (true, true) => removable.push((i, j)),
            (false, false) => addable.push((i, j)),
            _ => {}
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edits = Vec::with_capacity(budget);
    while edits.len() < budget {
        let want_remove = rng.random_bool(0.5);
        let (pool, action) = match (want_remove, removable.is_empty(), addable.is_empty()) {
            (_, true, true) => break,
            (true, false, _) | (false, false, true) => (&mut removable, EditAction::Remove),
            _ => (&mut addable, EditAction::Add),
        };
        let k = rng.random_range(0..pool.len());
        let (i, j) = pool.swap_remove(k);
        edits.push(Edit::new(i, j, action, 0.0));
    }
    let list = EditList::from_edits(edits, budget);
    if list.shortfall() > 0 {
        log::warn!("DICE produced {} of {} flips; candidate pools ran out", list.len(), budget);
    }
    Ok(list)
}

/// Degree-preserving rewiring: pick edges `(a, b)` and `(c, d)` with four
/// distinct endpoints and replace them by `(a, d)` and `(c, b)` when neither
/// exists. Gives up after `50 * swaps + 1000` attempts.
pub fn null_model(
    g: &Graph,
    swaps: usize,
    seed: u64,
    forbidden: Option<&HashSet<(usize, usize)>>,
) -> Result<Graph> {
    let mut out = g.clone();
    let mut edges = g.edges();
    if swaps == 0 || edges.len() < 2 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = 50 * swaps + 1000;
    let mut done = 0;
    for _ in 0..cap {
        if done == swaps {
            break;
        }
        let e1 = rng.random_range(0..edges.len());
        let e2 = rng.random_range(0..edges.len());
        if e1 == e2 {
            continue;
        }
        let (a, b) = edges[e1];
        let (mut c, mut d) = edges[e2];
        if rng.random_bool(0.5) {
            std::mem::swap(&mut c, &mut d);
        }
        if a == c || a == d || b == c || b == d {
            continue;
        }
        if out.has_edge(a, d) || out.has_edge(c, b) {
            continue;
        }
        if !allowed(&out, forbidden, a, d) || !allowed(&out, forbidden, c, b) {
            continue;
        }
        out.set_edge(a, b, false);
        out.set_edge(c, d, false);
        out.set_edge(a, d, true);
        out.set_edge(c, b, true);
        edges[e1] = (a.min(d), a.max(d));
        edges[e2] = (c.min(b), c.max(b));
        done += 1;
    }
    if done < swaps {
        log::warn!("null model completed {done} of {swaps} swaps");
    }
    Ok(out)
}

/// Swap count whose flips best fit inside `budget`: each swap flips four pairs.
pub fn swaps_for_budget(budget: usize) -> usize {
    budget / 4
}

/// Flips turning `from` into `to`, as a canonical edit list.
pub fn diff_edits(from: &Graph, to: &Graph) -> Result<EditList> {
    if from.n() != to.n() {
        return Err(Error::Config(format!(
            "graphs have different node counts ({} vs {})",
            from.n(),
            to.n()
        )));
    }
    let n = from.n();
    let mut edits = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            match (from.has_edge(i, j), to.has_edge(i, j)) {
                (false, true) => edits.push(Edit::new(i, j, EditAction::Add, 0.0)),
                (true, false) => edits.push(Edit::new(i, j, EditAction::Remove, 0.0)),
                _ => {}
            }
        }
    }
    let len = edits.len();
    Ok(EditList::from_edits(edits, len))
}

/// Runs `kind` with a flip budget and returns the edits.
pub fn run_baseline(
    kind: BaselineKind,
    g: &Graph,
    budget: usize,
    seed: u64,
    forbidden: Option<&HashSet<(usize, usize)>>,
) -> Result<EditList> {
    match kind {
        BaselineKind::RandomFlip => random_flip(g, budget, seed, forbidden),
        BaselineKind::Dice => dice(g, budget, seed, forbidden),
        BaselineKind::NullModel => {
            let rewired = null_model(g, swaps_for_budget(budget), seed, forbidden)?;
            diff_edits(g, &rewired)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{erdos_renyi, planted_partition, random_bipartite};

    fn complete(n: usize) -> Graph {
        let e: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Graph::from_edges(n, &e).unwrap()
    }

    #[test]
    fn random_flip_basics() {
        let g = erdos_renyi(12, 0.3, 1);
        assert!(random_flip(&g, 0, 0, None).unwrap().is_empty());
        assert_eq!(random_flip(&g, 5, 3, None).unwrap(), random_flip(&g, 5, 3, None).unwrap());
        let k3 = complete(3);
        let e = random_flip(&k3, 1, 9, None).unwrap();
        assert_eq!(e.as_slice()[0].action, EditAction::Remove);
        assert!(matches!(random_flip(&k3, 4, 0, None), Err(Error::Infeasible(_))));
    }

    #[test]
    fn random_flip_pairs_distinct_and_consistent() {
        let g = erdos_renyi(15, 0.3, 2);
        let e = random_flip(&g, 20, 1, None).unwrap();
        let pairs: HashSet<_> = e.iter().map(|x| x.pair()).collect();
        assert_eq!(pairs.len(), 20);
        for x in e.iter() {
            assert_eq!(g.has_edge(x.i, x.j), x.action == EditAction::Remove);
        }
    }

    #[test]
    fn dice_respects_communities() {
        let g = planted_partition(40, 2, 0.3, 0.05, 5);
        let labels = g.labels().unwrap().to_vec();
        let e = dice(&g, 30, 2, None).unwrap();
        assert_eq!(e.len(), 30);
        for x in e.iter() {
            match x.action {
                EditAction::Remove => assert!(labels[x.i] == labels[x.j] && g.has_edge(x.i, x.j)),
                EditAction::Add => assert!(labels[x.i] != labels[x.j] && !g.has_edge(x.i, x.j)),
            }
        }
        assert!(dice(&g, 0, 0, None).unwrap().is_empty());
    }

    #[test]
    fn dice_single_label_only_removes() {
        let g = erdos_renyi(10, 0.4, 3).with_labels(vec![0; 10]).unwrap();
        let m = g.edge_count();
        let e = dice(&g, m + 5, 1, None).unwrap();
        assert_eq!(e.len(), m);
        assert_eq!(e.count(EditAction::Remove), m);
        assert_eq!(e.shortfall(), 5);
    }

    #[test]
    fn dice_needs_labels() {
        let g = erdos_renyi(5, 0.5, 0);
        assert!(matches!(dice(&g, 1, 0, None), Err(Error::Unsupported(_))));
    }

    #[test]
    fn null_model_preserves_degrees() {
        let g = erdos_renyi(30, 0.2, 6);
        let r = null_model(&g, 25, 1, None).unwrap();
        assert_eq!(r.degrees(), g.degrees());
        assert_eq!(r.edge_count(), g.edge_count());
        assert_ne!(r, g);
        assert!(r.adjacency().is_symmetric());
    }

    #[test]
    fn null_model_on_k4_is_identity() {
        let g = complete(4);
        assert_eq!(null_model(&g, 10, 3, None).unwrap(), g);
    }

    #[test]
    fn null_model_keeps_bipartite_structure() {
        let g = random_bipartite(8, 10, 0.3, 2);
        let r = null_model(&g, 10, 4, None).unwrap();
        assert_eq!(r.degrees(), g.degrees());
        for (i, j) in r.edges() {
            assert!(g.is_admissible(i, j));
        }
    }

    #[test]
    fn null_model_edits_are_within_budget() {
        let g = erdos_renyi(30, 0.2, 7);
        let e = run_baseline(BaselineKind::NullModel, &g, 10, 2, None).unwrap();
        assert!(e.len() <= 10);
        assert_eq!(e.count(EditAction::Add), e.count(EditAction::Remove));
    }
}
