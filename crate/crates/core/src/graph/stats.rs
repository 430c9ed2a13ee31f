use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Structural summary used to judge how visible a perturbation is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub avg_degree: f64,
    pub density: f64,
    /// Longest shortest path inside the largest connected component.
    pub diameter: usize,
    /// Mean local clustering over all nodes; nodes of degree < 2 count as 0.
    pub avg_clustering: f64,
    /// Mean shortest-path length over ordered pairs of the largest component.
    pub avg_path_length: f64,
}

pub fn compute_stats(g: &Graph) -> Result<GraphStats> {
    let n = g.n();
    if n == 0 {
        return Err(Error::Empty("graph has no nodes"));
    }
    let adj = g.neighbors();
    let edges = adj.iter().map(Vec::len).sum::<usize>() / 2;
    let density = if n > 1 {
        2.0 * edges as f64 / (n as f64 * (n - 1) as f64)
    } else {
        0.0
    };

    let mut clustering = 0.0;
    let mut marker = vec![false; n];
    for v in 0..n {
        let k = adj[v].len();
        if k < 2 {
            continue;
        }
        for &u in &adj[v] {
            marker[u] = true;
        }
        let mut links = 0usize;
        for &u in &adj[v] {
            links += adj[u].iter().filter(|&&w| marker[w]).count();
        }
        for &u in &adj[v] {
            marker[u] = false;
        }
        // each neighbour link was seen from both ends
        clustering += (links / 2) as f64 / (k * (k - 1) / 2) as f64;
    }

    let component = g.largest_component();
    let m = component.len();
    let mut diameter = 0;
    let mut total: u64 = 0;
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &s in &component {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    total += dist[w] as u64;
                    diameter = diameter.max(dist[w]);
                    queue.push_back(w);
                }
            }
        }
    }
    let avg_path_length = if m > 1 {
        total as f64 / (m as f64 * (m - 1) as f64)
    } else {
        0.0
    };

    Ok(GraphStats {
        nodes: n,
        edges,
        avg_degree: 2.0 * edges as f64 / n as f64,
        density,
        diameter,
        avg_clustering: clustering / n as f64,
        avg_path_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let s = compute_stats(&g).unwrap();
        assert_eq!(s.avg_clustering, 1.0);
        assert_eq!(s.diameter, 1);
        assert_eq!(s.avg_path_length, 1.0);
    }

    #[test]
    fn path_of_three() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let s = compute_stats(&g).unwrap();
        assert_eq!(s.edges, 2);
        assert!((s.avg_degree - 4.0 / 3.0).abs() < 1e-15);
        assert!((s.density - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.diameter, 2);
        // ordered pairs: (0,1)=1 (0,2)=2 (1,2)=1, twice, over 6
        assert!((s.avg_path_length - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.avg_clustering, 0.0);
    }

    #[test]
    fn empty_graph_is_an_error() {
        assert!(matches!(compute_stats(&Graph::empty(0)), Err(Error::Empty(_))));
    }

    #[test]
    fn disconnected_uses_largest_component() {
        let g = Graph::from_edges(6, &[(0, 1), (2, 3), (3, 4), (4, 5)]).unwrap();
        let s = compute_stats(&g).unwrap();
        assert_eq!(s.diameter, 3);
    }
}
