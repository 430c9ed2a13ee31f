//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use linkpoison::graph::Graph;
use linkpoison::Matrix;

/// 1-based rank of candidate `i` in descending order, ties kept in input order.
fn position(scores: &[f64], i: usize) -> usize {
    let above = scores.iter().filter(|&&s| s > scores[i]).count();
    let tied_before = (0..i).filter(|&j| scores[j] == scores[i]).count();
    above + tied_before + 1
}

pub fn auc(scores: &[f64], rel: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if rel[i] && !rel[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

pub fn ap(scores: &[f64], rel: &[bool]) -> f64 {
    let positives: Vec<usize> = (0..scores.len()).filter(|&i| rel[i]).collect();
    let mut sum = 0.0;
    for &i in &positives {
        let p = position(scores, i);
        let hits = positives.iter().filter(|&&j| position(scores, j) <= p).count();
        sum += hits as f64 / p as f64;
    }
    sum / positives.len() as f64
}

pub fn ndcg(scores: &[f64], rel: &[bool], k: usize) -> f64 {
    let total = rel.iter().filter(|&&r| r).count();
    if total == 0 {
        return 0.0;
    }
    let mut dcg = 0.0;
    for i in 0..scores.len() {
        let p = position(scores, i);
        if rel[i] && p <= k {
            dcg += 1.0 / ((p + 1) as f64).log2();
        }
    }
    let mut idcg = 0.0;
    for r in 1..=total.min(k) {
        idcg += 1.0 / ((r + 1) as f64).log2();
    }
    dcg / idcg
}

pub fn recall(scores: &[f64], rel: &[bool], k: usize) -> f64 {
    let total = rel.iter().filter(|&&r| r).count();
    let found = (0..scores.len()).filter(|&i| rel[i] && position(scores, i) <= k).count();
    found as f64 / total as f64
}

/// Diameter, mean path length and mean clustering from Floyd-Warshall and
/// triple enumeration.
pub fn stats(g: &Graph) -> (usize, f64, f64) {
    let n = g.n();
    const INF: usize = usize::MAX / 4;
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if g.has_edge(i, j) {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    // largest component: biggest reachability class, lowest node id on ties
    let mut best: Vec<usize> = Vec::new();
    for s in 0..n {
        let comp: Vec<usize> = (0..n).filter(|&t| d[s][t] < INF).collect();
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let mut diameter = 0;
    let mut total = 0usize;
    for &a in &best {
        for &b in &best {
            if a != b {
                diameter = diameter.max(d[a][b]);
                total += d[a][b];
            }
        }
    }
    let m = best.len();
    let apl = if m > 1 { total as f64 / (m * (m - 1)) as f64 } else { 0.0 };

    let mut cc = 0.0;
    for v in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&u| g.has_edge(v, u)).collect();
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let mut tri = 0;
        for a in 0..k {
            for b in (a + 1)..k {
                if g.has_edge(nb[a], nb[b]) {
                    tri += 1;
                }
            }
        }
        cc += tri as f64 / (k * (k - 1) / 2) as f64;
    }
    (diameter, apl, cc / n as f64)
}

/// Greedy edge selection by full sort: every off-diagonal upper pair ordered
/// by |g| descending then (i, j); conditions checked in that order.
pub fn greedy(
    grad: &Matrix,
    g: &Graph,
    budget: usize,
    blocked: &dyn Fn(usize, usize) -> bool,
) -> Vec<(usize, usize, bool)> {
    let n = g.n();
    let mut cells = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = grad[(i, j)];
            if v != 0.0 && g.is_admissible(i, j) && !blocked(i, j) {
                cells.push((v.abs(), i, j));
            }
        }
    }
    cells.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut out = Vec::new();
    for (_, i, j) in cells {
        if out.len() == budget {
            break;
        }
        let v = grad[(i, j)];
        let edge = g.has_edge(i, j);
        if v > 0.0 && !edge {
            out.push((i, j, true));
        } else if v < 0.0 && edge {
            out.push((i, j, false));
        }
    }
    out
}
