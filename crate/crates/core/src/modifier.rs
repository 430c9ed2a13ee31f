//! Turns a meta-gradient into a budgeted list of edge flips.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edit, EditAction, EditList, Graph};
use crate::tensor::Matrix;

/// Either an absolute number of flips or a fraction of the edge count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Budget {
    Count(usize),
    Fraction(f64),
}

impl Budget {
    /// Largest fraction of the edge count accepted.
    pub const MAX_FRACTION: f64 = 0.5;

    /// Flip count for a graph with `edge_count` edges; fractions round half up.
    pub fn resolve(&self, edge_count: usize) -> Result<usize> {
        match *self {
            Budget::Count(c) => Ok(c),
            Budget::Fraction(f) => {
                if !(0.0..=Self::MAX_FRACTION).contains(&f) {
                    return Err(Error::Config(format!(
                        "budget fraction {f} outside [0, {}]",
                        Self::MAX_FRACTION
                    )));
                }
                Ok((f * edge_count as f64 + 0.5).floor() as usize)
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Budget::Count(c) => c.to_string(),
            Budget::Fraction(f) => format!("{}%", f * 100.0),
        }
    }
}

/// `(G + G^T) / 2`.
pub fn symmetrize(grad: &Matrix) -> Result<Matrix> {
    if !grad.is_square() {
        return Err(Error::Shape {
            op: "symmetrize",
            left: grad.shape(),
            right: (grad.cols(), grad.rows()),
        });
    }
    Ok(Matrix::from_fn(grad.rows(), grad.cols(), |i, j| {
        0.5 * (grad[(i, j)] + grad[(j, i)])
    }))
}

#[derive(PartialEq)]
struct Candidate {
    magnitude: f64,
    i: usize,
    j: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on magnitude, then the smaller pair first
        self.magnitude
            .total_cmp(&other.magnitude)
            .then_with(|| (other.i, other.j).cmp(&(self.i, self.j)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy selection over the upper triangle of a symmetrized gradient.
///
/// Pairs are visited by decreasing `|grad|` (ties by smallest `(i, j)`). A
/// positive entry on a non-edge becomes an addition, a negative entry on an
/// edge a removal; any visited pair is then frozen whether or not it was
/// used. Zero entries, inadmissible pairs (same side of a bipartite graph)
/// and `forbidden` pairs are never visited.
pub fn select_edits(
    grad: &Matrix,
    g: &Graph,
    budget: usize,
    forbidden: Option<&HashSet<(usize, usize)>>,
) -> Result<EditList> {
    let n = g.n();
    if grad.shape() != (n, n) {
        return Err(Error::Shape {
            op: "select_edits",
            left: grad.shape(),
            right: (n, n),
        });
    }
    if !grad.all_finite() {
        return Err(Error::NonFinite("meta-gradient".into()));
    }
    let mut edits = Vec::with_capacity(budget);
    if budget > 0 {
        let mut heap: BinaryHeap<Candidate> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                grad[(i, j)] != 0.0
                    && g.is_admissible(i, j)
                    && !forbidden.is_some_and(|f| f.contains(&(i, j)))
            })
            .map(|(i, j)| Candidate {
                magnitude: grad[(i, j)].abs(),
                i,
                j,
            })
            .collect();
        while edits.len() < budget {
            let Some(c) = heap.pop() else { break };
            let v = grad[(c.i, c.j)];
            let present = g.has_edge(c.i, c.j);
            let action = if v > 0.0 && !present {
                EditAction::Add
            } else if v < 0.0 && present {
                EditAction::Remove
            } else {
                continue;
            };
            edits.push(Edit::new(c.i, c.j, action, c.magnitude));
        }
    }
    let list = EditList::from_edits(edits, budget);
    if list.shortfall() > 0 {
        log::warn!(
            "only {} of {} requested flips were feasible",
            list.len(),
            budget
        );
    }
    Ok(list)
}

/// A graph together with the edits that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Poisoned {
    pub graph: Graph,
    pub edits: EditList,
}

/// Applies `edits`, checking that every addition targets a non-edge and
/// every removal an existing edge.
pub fn poison(g: &Graph, edits: &EditList) -> Result<Poisoned> {
    let mut seen = HashSet::with_capacity(edits.len());
    for e in edits.iter() {
        if !seen.insert(e.pair()) {
            return Err(Error::InvalidEdit(format!("pair ({}, {}) edited twice", e.i, e.j)));
        }
        if e.i < g.n() && e.j < g.n() {
            let present = g.has_edge(e.i, e.j);
            if present != (e.action == EditAction::Remove) {
                return Err(Error::InvalidEdit(format!(
                    "{} on ({}, {}) but the edge is {}",
                    e.action,
                    e.i,
                    e.j,
                    if present { "present" } else { "absent" }
                )));
            }
        }
    }
    Ok(Poisoned {
        graph: g.apply_edits(edits)?,
        edits: edits.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn actions(list: &EditList) -> Vec<(usize, usize, EditAction)> {
        list.iter().map(|e| (e.i, e.j, e.action)).collect()
    }

    #[test]
    fn symmetrize_examples() {
        let s = symmetrize(&Matrix::from_rows(&[[0.0, 4.0], [2.0, 0.0]])).unwrap();
        assert_eq!(s, Matrix::from_rows(&[[0.0, 3.0], [3.0, 0.0]]));
        let sym = Matrix::from_rows(&[[1.0, 2.0], [2.0, 5.0]]);
        assert_eq!(symmetrize(&sym).unwrap(), sym);
        let anti = Matrix::from_rows(&[[0.0, 1.5], [-1.5, 0.0]]);
        assert_eq!(symmetrize(&anti).unwrap(), Matrix::zeros(2, 2));
        assert!(symmetrize(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn hand_trace() {
        let grad = Matrix::from_rows(&[[0.0, 2.5, -1.0], [2.5, 0.0, 0.5], [-1.0, 0.5, 0.0]]);
        let g = Graph::from_edges(3, &[(0, 2)]).unwrap();
        let e = select_edits(&grad, &g, 2, None).unwrap();
        assert_eq!(
            actions(&e),
            vec![(0, 1, EditAction::Add), (0, 2, EditAction::Remove)]
        );
        assert_eq!(e.as_slice()[0].magnitude, 2.5);
    }

    #[test]
    fn zero_budget_is_empty() {
        let grad = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let g = Graph::empty(2);
        assert!(select_edits(&grad, &g, 0, None).unwrap().is_empty());
    }

    #[test]
    fn failing_argmax_falls_through() {
        // (0,1) has the largest positive entry but is already an edge
        let grad = Matrix::from_rows(&[[0.0, 3.0, 1.0], [3.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let e = select_edits(&grad, &g, 1, None).unwrap();
        assert_eq!(actions(&e), vec![(0, 2, EditAction::Add)]);
    }

    #[test]
    fn ties_prefer_smaller_pair_and_zeros_are_skipped() {
        let grad = Matrix::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]);
        let g = Graph::empty(3);
        let e = select_edits(&grad, &g, 5, None).unwrap();
        assert_eq!(
            actions(&e),
            vec![(0, 1, EditAction::Add), (1, 2, EditAction::Add)]
        );
        assert_eq!(e.shortfall(), 3);
    }

    #[test]
    fn forbidden_and_bipartite_pairs_excluded() {
        let grad = Matrix::filled(4, 4, 1.0);
        let g = Graph::empty(4)
            .with_bipartite(crate::graph::Bipartite { users: 2, items: 2 })
            .unwrap();
        let forbidden: HashSet<_> = [(0, 2)].into_iter().collect();
        let e = select_edits(&grad, &g, 10, Some(&forbidden)).unwrap();
        assert_eq!(
            actions(&e),
            vec![
                (0, 3, EditAction::Add),
                (1, 2, EditAction::Add),
                (1, 3, EditAction::Add)
            ]
        );
    }

    #[test]
    fn budget_resolution() {
        assert_eq!(Budget::Count(7).resolve(100).unwrap(), 7);
        assert_eq!(Budget::Fraction(0.05).resolve(4488).unwrap(), 224);
        assert_eq!(Budget::Fraction(0.025).resolve(100).unwrap(), 3);
        assert_eq!(Budget::Fraction(0.05).resolve(10).unwrap(), 1);
        assert!(Budget::Fraction(0.6).resolve(10).is_err());
    }

    #[test]
    fn poison_applies_exact_budget() {
        let grad = Matrix::from_rows(&[[0.0, 2.5, -1.0], [2.5, 0.0, 0.5], [-1.0, 0.5, 0.0]]);
        let g = Graph::from_edges(3, &[(0, 2)]).unwrap();
        let e = select_edits(&grad, &g, 2, None).unwrap();
        let p = poison(&g, &e).unwrap();
        assert_eq!(p.graph.edges(), vec![(0, 1)]);
        let bad = EditList::from_edits(vec![Edit::new(0, 2, EditAction::Add, 1.0)], 1);
        assert!(poison(&g, &bad).is_err());
    }
}
