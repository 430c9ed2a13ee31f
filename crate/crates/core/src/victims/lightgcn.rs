//! LightGCN propagation and pairwise ranking training on a user/item graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::optim::Optimizer;
use crate::tensor::{Matrix, Tape, Var};

pub const DIM: usize = 32;
pub const LAYERS: usize = 3;
/// Clamp on the BPR score difference so `ln sigmoid` stays finite.
const MARGIN_CLIP: f64 = 30.0;

/// Layer-0 embeddings: users first, then items.
#[derive(Clone, Debug, PartialEq)]
pub struct LightGcnParams {
    pub embeddings: Matrix,
}

impl LightGcnParams {
    pub fn init(nodes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.1).expect("valid std");
        Self {
            embeddings: Matrix::from_fn(nodes, DIM, |_, _| rng.sample(normal)),
        }
    }
}

/// Symmetric normalisation `1 / (sqrt|N_u| sqrt|N_i|)` on every edge.
pub fn propagation_matrix(g: &Graph) -> Matrix {
    let deg = g.degrees();
    let n = g.n();
    let mut m = Matrix::zeros(n, n);
    for (i, j) in g.edges() {
        let c = 1.0 / ((deg[i] as f64).sqrt() * (deg[j] as f64).sqrt());
        m[(i, j)] = c;
        m[(j, i)] = c;
    }
    m
}

/// Mean of the layer-0..=LAYERS embeddings.
pub fn propagate(tape: &mut Tape, norm: Var, e0: Var) -> Result<Var> {
    let mut layer = e0;
    let mut total = e0;
    for _ in 0..LAYERS {
        layer = tape.matmul(norm, layer)?;
        total = tape.add(total, layer)?;
    }
    tape.scale(total, 1.0 / (LAYERS + 1) as f64)
}

/// Final embeddings for `params` on `g` without tracking gradients.
pub fn final_embeddings(params: &LightGcnParams, g: &Graph) -> Result<Matrix> {
    let mut tape = Tape::new();
    let norm = tape.constant(propagation_matrix(g));
    let e0 = tape.constant(params.embeddings.clone());
    let out = propagate(&mut tape, norm, e0)?;
    Ok(tape.value(out).clone())
}

/// `(user, positive item, negative item)` triples, one uniformly drawn
/// non-interacted item per training edge.
pub(crate) fn sample_triples(g: &Graph, rng: &mut impl Rng) -> Result<Vec<(usize, usize, usize)>> {
    let b = g
        .bipartite()
        .ok_or_else(|| Error::Config("LightGCN needs a bipartite user/item graph".into()))?;
    let mut triples = Vec::new();
    for (u, i) in g.edges() {
        let (user, item) = if b.is_user(u) { (u, i) } else { (i, u) };
        if g.degree(user) >= b.items {
            continue;
        }
        let neg = loop {
            let cand = b.users + rng.random_range(0..b.items);
            if !g.has_edge(user, cand) {
                break cand;
            }
        };
        triples.push((user, item, neg));
    }
    Ok(triples)
}

/// One epoch of mean BPR loss over freshly sampled triples.
pub(crate) fn train_step(
    params: &mut LightGcnParams,
    optimizer: &mut Optimizer,
    g: &Graph,
    norm: &Matrix,
    rng: &mut impl Rng,
) -> Result<f64> {
    let triples = sample_triples(g, rng)?;
    if triples.is_empty() {
        return Err(Error::Empty("no training interactions"));
    }
    let users: Vec<usize> = triples.iter().map(|t| t.0).collect();
    let pos: Vec<usize> = triples.iter().map(|t| t.1).collect();
    let neg: Vec<usize> = triples.iter().map(|t| t.2).collect();

    let mut tape = Tape::new();
    let nv = tape.constant(norm.clone());
    let e0 = tape.param(params.embeddings.clone());
    let f = propagate(&mut tape, nv, e0)?;
    let eu = tape.gather_rows(f, &users)?;
    let ep = tape.gather_rows(f, &pos)?;
    let en = tape.gather_rows(f, &neg)?;
    let diff = tape.sub(ep, en)?;
    let prod = tape.mul(eu, diff)?;
    let margin = tape.row_sum(prod)?;
    let margin = tape.clamp(margin, -MARGIN_CLIP, MARGIN_CLIP)?;
    let s = tape.sigmoid(margin)?;
    let ls = tape.log(s)?;
    let mean = tape.mean(ls)?;
    let loss = tape.scale(mean, -1.0)?;
    let grads = tape.backward(loss)?;
    optimizer.step(&mut [&mut params.embeddings], &[grads.wrt(e0)]);
    Ok(tape.value(loss).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{random_bipartite, Bipartite};

    fn brute_force(g: &Graph, e0: &Matrix) -> Matrix {
        let n = g.n();
        let deg = g.degrees();
        let nb = g.neighbors();
        let mut layers = vec![e0.clone()];
        for k in 0..LAYERS {
            let prev = &layers[k];
            let mut next = Matrix::zeros(n, DIM);
            for u in 0..n {
                for &i in &nb[u] {
                    let c = 1.0 / ((deg[u] as f64).sqrt() * (deg[i] as f64).sqrt());
                    for d in 0..DIM {
                        next[(u, d)] += c * prev[(i, d)];
                    }
                }
            }
            layers.push(next);
        }
        let mut total = layers[0].clone();
        for l in &layers[1..] {
            for (t, v) in total.data_mut().iter_mut().zip(l.data()) {
                *t += v;
            }
        }
        total.map(|v| v * 0.25)
    }

    #[test]
    fn matches_per_node_loop() {
        for seed in 0..10 {
            let g = random_bipartite(8, 12, 0.25, seed);
            let p = LightGcnParams::init(20, seed);
            assert_eq!(final_embeddings(&p, &g).unwrap(), brute_force(&g, &p.embeddings));
        }
    }

    #[test]
    fn single_pair_first_layer_swaps_embeddings() {
        let g = Graph::from_edges(2, &[(0, 1)])
            .unwrap()
            .with_bipartite(Bipartite { users: 1, items: 1 })
            .unwrap();
        let p = LightGcnParams::init(2, 0);
        let mut t = Tape::new();
        let norm = t.constant(propagation_matrix(&g));
        let e0 = t.constant(p.embeddings.clone());
        let e1 = t.matmul(norm, e0).unwrap();
        assert_eq!(t.value(e1).row(0), p.embeddings.row(1));
    }

    #[test]
    fn empty_graph_keeps_quarter_of_layer_zero() {
        let g = Graph::empty(4).with_bipartite(Bipartite { users: 2, items: 2 }).unwrap();
        let p = LightGcnParams::init(4, 1);
        let out = final_embeddings(&p, &g).unwrap();
        assert_eq!(out, p.embeddings.map(|v| v * 0.25));
    }

    #[test]
    fn propagation_is_linear() {
        let g = random_bipartite(5, 6, 0.4, 2);
        let p = LightGcnParams::init(11, 3);
        let doubled = LightGcnParams {
            embeddings: p.embeddings.map(|v| 2.0 * v),
        };
        let a = final_embeddings(&p, &g).unwrap();
        let b = final_embeddings(&doubled, &g).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((2.0 * x - y).abs() <= 1e-15);
        }
    }
}
