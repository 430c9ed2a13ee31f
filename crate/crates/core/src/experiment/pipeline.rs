//! Attack, baseline and evaluation steps shared by every command.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::attack::{run_attack, AttackConfig, MetaGradient};
use crate::baselines::{run_baseline, BaselineKind};
use crate::error::{Error, Result};
use crate::graph::{Bipartite, EditList, Graph, LinkSplit};
use crate::metrics::MetricKind;
use crate::modifier::{poison, select_edits, symmetrize, Budget};
use crate::victims::{train_victim, TrainedVictim, VictimHyper, VictimKind};

pub struct AttackOutcome {
    pub meta: MetaGradient,
    pub budget: usize,
    pub edits: EditList,
    /// The input graph with the edits applied; held-out pairs are untouched.
    pub poisoned: Graph,
}

/// Meta-gradient attack on the training part of `g`, resolved against the
/// edge count of `g`.
pub fn attack_graph(g: &Graph, split: &LinkSplit, cfg: &AttackConfig) -> Result<AttackOutcome> {
    let budget = cfg.budget.resolve(g.edge_count())?;
    let meta = run_attack(g, split, cfg)?;
    let grad = symmetrize(&meta.value)?;
    let train = split.training_graph(g);
    let edits = select_edits(&grad, &train, budget, Some(&split.held_out()))?;
    let poisoned = poison(g, &edits)?.graph;
    Ok(AttackOutcome {
        meta,
        budget,
        edits,
        poisoned,
    })
}

/// A baseline perturbation of the training part of `g`, applied to `g`.
pub fn baseline_graph(
    kind: BaselineKind,
    g: &Graph,
    split: &LinkSplit,
    budget: Budget,
    seed: u64,
) -> Result<(EditList, Graph)> {
    let flips = budget.resolve(g.edge_count())?;
    let train = split.training_graph(g);
    let edits = run_baseline(kind, &train, flips, seed, Some(&split.held_out()))?;
    let poisoned = poison(g, &edits)?.graph;
    Ok((edits, poisoned))
}

/// Scores of one victim on the split's test pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VictimScores {
    pub kind: VictimKind,
    pub values: Vec<(MetricKind, f64)>,
}

impl VictimScores {
    pub fn get(&self, m: MetricKind) -> Option<f64> {
        self.values.iter().find(|(k, _)| *k == m).map(|&(_, v)| v)
    }
}

/// One victim model and how to train it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VictimRun {
    pub kind: VictimKind,
    pub hyper: VictimHyper,
    pub seed: u64,
    /// Independent trainings whose metrics are averaged.
    pub restarts: usize,
}

/// Seed of restart `r`; restart 0 uses `seed` itself.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    seed ^ ((r as u64) << 32)
}

/// Trains the victim on the training part of `g` and scores the test pairs,
/// averaging over restarts.
///
/// ROC-AUC and AP rank all test pairs together. On bipartite graphs NDCG@k
/// and Recall@k rank, for each user with a test positive, every item the
/// user has no training or validation link to, and are averaged over users.
/// Elsewhere they are averaged over source nodes of the test pairs.
pub fn evaluate_victim(
    run: &VictimRun,
    g: &Graph,
    split: &LinkSplit,
    metrics: &[MetricKind],
    k: usize,
) -> Result<VictimScores> {
    let (pairs, labels) = split.test_pairs();
    if pairs.is_empty() {
        return Err(Error::Config("evaluation needs a nonzero test fraction".into()));
    }
    let restarts = run.restarts.max(1);
    let mut sums = vec![0.0; metrics.len()];
    for r in 0..restarts {
        let victim = train_victim(run.kind, g, split, run.hyper, restart_seed(run.seed, r))?;
        let scores = victim.predict_links(&pairs)?;
        for (sum, &m) in sums.iter_mut().zip(metrics) {
            *sum += match m {
                MetricKind::RocAuc | MetricKind::Ap => m.compute(&scores, &labels, k)?,
                MetricKind::Ndcg | MetricKind::Recall => match g.bipartite() {
                    Some(b) => per_user(&victim, b, split, m, k)?,
                    None => per_source(m, &pairs, &scores, &labels, k)?,
                },
            };
        }
    }
    let values = metrics
        .iter()
        .zip(sums)
        .map(|(&m, s)| (m, s / restarts as f64))
        .collect();
    Ok(VictimScores { kind: run.kind, values })
}

fn per_user(victim: &TrainedVictim, b: Bipartite, split: &LinkSplit, m: MetricKind, k: usize) -> Result<f64> {
    let known: HashSet<(usize, usize)> = split.train_pos.iter().chain(&split.val_pos).copied().collect();
    let mut relevant: BTreeMap<usize, HashSet<usize>> = BTreeMap::new();
    for &(i, j) in &split.test_pos {
        let (u, item) = if b.is_user(i) { (i, j) } else { (j, i) };
        relevant.entry(u).or_default().insert(item);
    }
    if relevant.is_empty() {
        return Err(Error::Empty("no user has a positive test pair"));
    }
    let mut total = 0.0;
    for (&u, rel) in &relevant {
        let items: Vec<usize> = (b.users..b.users + b.items)
            .filter(|&i| !known.contains(&(u.min(i), u.max(i))))
            .collect();
        let pairs: Vec<_> = items.iter().map(|&i| (u, i)).collect();
        let scores = victim.predict_links(&pairs)?;
        let hits: Vec<bool> = items.iter().map(|i| rel.contains(i)).collect();
        total += m.compute(&scores, &hits, k)?;
    }
    Ok(total / relevant.len() as f64)
}

fn per_source(m: MetricKind, pairs: &[(usize, usize)], scores: &[f64], labels: &[bool], k: usize) -> Result<f64> {
    let mut groups: BTreeMap<usize, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for ((&(i, _), &s), &l) in pairs.iter().zip(scores).zip(labels) {
        let e = groups.entry(i).or_default();
        e.0.push(s);
        e.1.push(l);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (s, l) in groups.values() {
        if l.iter().any(|&x| x) {
            total += m.compute(s, l, k)?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("no node has a positive test pair"));
    }
    Ok(total / count as f64)
}
