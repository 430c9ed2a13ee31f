//! Undirected, unweighted graphs stored as dense symmetric adjacency matrices.

mod edits;
mod generate;
pub mod io;
mod split;
mod stats;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use edits::{Edit, EditAction, EditList};
pub use generate::{erdos_renyi, planted_partition, random_bipartite};
pub use split::{make_split, LinkSplit, SplitFractions};
pub use stats::{compute_stats, GraphStats};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// User/item partition of a bipartite interaction graph. Users occupy node ids
/// `0..users`, items occupy `users..users + items`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartite {
    pub users: usize,
    pub items: usize,
}

impl Bipartite {
    pub fn is_user(&self, v: usize) -> bool {
        v < self.users
    }

    /// True when `(i, j)` joins a user to an item.
    pub fn crosses(&self, i: usize, j: usize) -> bool {
        self.is_user(i) != self.is_user(j)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
    features: Option<Matrix>,
    labels: Option<Vec<usize>>,
    bipartite: Option<Bipartite>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: Matrix::zeros(n, n),
            features: None,
            labels: None,
            bipartite: None,
        }
    }

    /// Builds a graph from undirected edges. Duplicates and reversed copies
    /// collapse to one edge; self-loops are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidEdit(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidEdit(format!("self-loop at node {i}")));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    /// Builds a graph from a dense matrix, which must be symmetric, binary and
    /// zero on the diagonal.
    pub fn from_adjacency(adjacency: Matrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::Shape {
                op: "from_adjacency",
                left: adjacency.shape(),
                right: (adjacency.rows(), adjacency.rows()),
            });
        }
        let n = adjacency.rows();
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::InvalidEdit(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let v = adjacency[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::InvalidEdit(format!("entry ({i}, {j}) = {v} is not binary")));
                }
                if v != adjacency[(j, i)] {
                    return Err(Error::InvalidEdit(format!("asymmetric entry ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            adjacency,
            features: None,
            labels: None,
            bipartite: None,
        })
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        if features.rows() != self.n() {
            return Err(Error::Shape {
                op: "features",
                left: features.shape(),
                right: (self.n(), features.cols()),
            });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::Shape {
                op: "labels",
                left: (labels.len(), 1),
                right: (self.n(), 1),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_bipartite(mut self, split: Bipartite) -> Result<Self> {
        if split.users + split.items != self.n() {
            return Err(Error::Shape {
                op: "bipartite",
                left: (split.users, split.items),
                right: (self.n(), 0),
            });
        }
        if let Some((i, j)) = self.edges().into_iter().find(|&(i, j)| !split.crosses(i, j)) {
            return Err(Error::InvalidEdit(format!(
                "edge ({i}, {j}) does not cross the user/item partition"
            )));
        }
        self.bipartite = Some(split);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn features(&self) -> Option<&Matrix> {
        self.features.as_ref()
    }

    /// Node features, or the identity matrix for featureless graphs.
    pub fn features_or_identity(&self) -> Matrix {
        self.features
            .clone()
            .unwrap_or_else(|| Matrix::identity(self.n()))
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn bipartite(&self) -> Option<Bipartite> {
        self.bipartite
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] != 0.0
    }

    pub(crate) fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        let v = if present { 1.0 } else { 0.0 };
        self.adjacency[(i, j)] = v;
        self.adjacency[(j, i)] = v;
    }

    /// Canonical edge list: `i < j`, sorted lexicographically.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            let row = self.adjacency.row(i);
            for (j, &v) in row.iter().enumerate().skip(i + 1) {
                if v != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| {
                self.adjacency.row(i)[i + 1..]
                    .iter()
                    .filter(|&&v| v != 0.0)
                    .count()
            })
            .sum()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency.row(i).iter().filter(|&&v| v != 0.0).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n()).map(|i| self.degree(i)).collect()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        (0..self.n())
            .map(|i| {
                self.adjacency
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }

    /// True when an edge between `i` and `j` may exist at all: off-diagonal,
    /// and crossing the partition for bipartite graphs.
    pub fn is_admissible(&self, i: usize, j: usize) -> bool {
        i != j && self.bipartite.is_none_or(|b| b.crosses(i, j))
    }

    /// Returns a copy with each listed pair flipped. Applying the same list
    /// twice restores the original graph.
    pub fn apply_edits(&self, edits: &EditList) -> Result<Graph> {
        let n = self.n();
        let mut out = self.clone();
        for e in edits.iter() {
            if e.i == e.j {
                return Err(Error::InvalidEdit(format!("edit on diagonal ({}, {})", e.i, e.j)));
            }
            if e.i >= n || e.j >= n {
                return Err(Error::InvalidEdit(format!(
                    "edit ({}, {}) out of range for {n} nodes",
                    e.i, e.j
                )));
            }
            let present = out.has_edge(e.i, e.j);
            out.set_edge(e.i, e.j, !present);
        }
        Ok(out)
    }

    /// Graph with the given edges removed; nodes, features and labels kept.
    pub fn without_edges(&self, edges: &[(usize, usize)]) -> Graph {
        let mut out = self.clone();
        for &(i, j) in edges {
            out.set_edge(i, j, false);
        }
        out
    }

    /// Subgraph induced by `nodes`, relabelled `0..nodes.len()` in the given
    /// order. Features and labels follow their nodes.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Graph> {
        let k = nodes.len();
        let adjacency = Matrix::from_fn(k, k, |a, b| self.adjacency[(nodes[a], nodes[b])]);
        let mut g = Graph::from_adjacency(adjacency)?;
        if let Some(f) = &self.features {
            let sub = Matrix::from_fn(k, f.cols(), |a, c| f[(nodes[a], c)]);
            g = g.with_features(sub)?;
        }
        if let Some(l) = &self.labels {
            g = g.with_labels(nodes.iter().map(|&v| l[v]).collect())?;
        }
        Ok(g)
    }

    /// Connected node set of at most `max_nodes`, grown breadth-first from the
    /// highest-degree node of the largest component (lowest id on ties).
    pub fn connected_subset(&self, max_nodes: usize) -> Vec<usize> {
        let component = self.largest_component();
        let degrees = self.degrees();
        let Some(&start) = component
            .iter()
            .max_by_key(|&&v| (degrees[v], std::cmp::Reverse(v)))
        else {
            return Vec::new();
        };
        let adj = self.neighbors();
        let mut seen = vec![false; self.n()];
        let mut order = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            if order.len() == max_nodes {
                break;
            }
            order.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order
    }

    /// Nodes of the largest connected component, ascending. Ties go to the
    /// component containing the smallest node id.
    pub fn largest_component(&self) -> Vec<usize> {
        let n = self.n();
        let adj = self.neighbors();
        let mut comp = vec![usize::MAX; n];
        let mut best: Vec<usize> = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut members = vec![s];
            comp[s] = s;
            let mut k = 0;
            while k < members.len() {
                let v = members[k];
                k += 1;
                for &w in &adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = s;
                        members.push(w);
                    }
                }
            }
            if members.len() > best.len() {
                best = members;
            }
        }
        best.sort_unstable();
        best
    }
}
