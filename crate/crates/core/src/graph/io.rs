//! Text formats: edge lists, feature and label CSVs, LINQS citation dumps and
//! user/item interaction logs.
//!
//! Edge lists hold one undirected edge per line as two whitespace-separated
//! non-negative integer ids. An optional `#nodes=N` header fixes the node
//! count; otherwise it is the largest id plus one. Other lines starting with
//! `#` are comments.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use log::{info, warn};

use super::{Bipartite, Graph};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Counts gathered while reading an edge list.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeListReport {
    /// Edge lines read, before any cleanup.
    pub raw_edges: usize,
    pub self_loops: usize,
    /// Lines that repeated an existing undirected edge, in either direction.
    pub duplicates: usize,
    /// Distinct undirected edges kept.
    pub edges: usize,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_edge_list(text: &str, origin: &str) -> Result<(Graph, EdgeListReport)> {
    let mut declared: Option<usize> = None;
    let mut pairs = Vec::new();
    let mut report = EdgeListReport::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: lineno + 1,
            msg,
        };
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(n) = rest.trim().strip_prefix("nodes=") {
                declared = Some(
                    n.trim()
                        .parse()
                        .map_err(|e| err(format!("bad node count {n:?}: {e}")))?,
                );
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(err(format!("expected two node ids, got {line:?}")));
        };
        let a: usize = a.parse().map_err(|e| err(format!("bad node id {a:?}: {e}")))?;
        let b: usize = b.parse().map_err(|e| err(format!("bad node id {b:?}: {e}")))?;
        report.raw_edges += 1;
        pairs.push((a, b, lineno + 1));
    }

    let max_id = pairs.iter().map(|&(a, b, _)| a.max(b) + 1).max().unwrap_or(0);
    let n = match declared {
        Some(n) if n < max_id => {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: 1,
                msg: format!("header declares {n} nodes but ids reach {}", max_id - 1),
            })
        }
        Some(n) => n,
        None => max_id,
    };

    let mut g = Graph::empty(n);
    for (a, b, lineno) in pairs {
        if a == b {
            warn!("{origin}:{lineno}: dropping self-loop on node {a}");
            report.self_loops += 1;
            continue;
        }
        if g.has_edge(a, b) {
            report.duplicates += 1;
            continue;
        }
        g.set_edge(a, b, true);
        report.edges += 1;
    }
    Ok((g, report))
}

pub fn load_edge_list(path: impl AsRef<Path>) -> Result<(Graph, EdgeListReport)> {
    let path = path.as_ref();
    let (g, report) = parse_edge_list(&read(path)?, &path.display().to_string())?;
    info!(
        "{}: {} nodes, {} raw edge lines, {} distinct edges",
        path.display(),
        g.n(),
        report.raw_edges,
        report.edges
    );
    Ok((g, report))
}

/// Canonical edge-list text: node-count header, then `i j` with `i < j` in
/// lexicographic order.
pub fn edge_list_string(g: &Graph) -> String {
    let mut out = format!("#nodes={}\n", g.n());
    for (i, j) in g.edges() {
        out.push_str(&format!("{i} {j}\n"));
    }
    out
}

pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, edge_list_string(g)).map_err(|e| Error::io(path, e))
}

pub fn parse_features(text: &str, origin: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                msg: format!("bad feature value: {e}"),
            })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line: lineno + 1,
                    msg: format!("expected {} columns, got {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_vec(rows.len(), cols, rows.into_iter().flatten().collect())
}

pub fn parse_labels(text: &str, n: usize, origin: &str) -> Result<Vec<usize>> {
    let mut labels = vec![None; n];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: lineno + 1,
            msg,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [node, label] = fields[..] else {
            return Err(err(format!("expected \"node,label\", got {line:?}")));
        };
        let Ok(node) = node.parse::<usize>() else {
            if lineno == 0 {
                continue; // header
            }
            return Err(err(format!("bad node id {node:?}")));
        };
        let label = label
            .parse::<usize>()
            .map_err(|e| err(format!("bad label {label:?}: {e}")))?;
        if node >= n {
            return Err(err(format!("node {node} out of range for {n} nodes")));
        }
        labels[node] = Some(label);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(v, l)| {
            l.ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: 0,
                msg: format!("node {v} has no label"),
            })
        })
        .collect()
}

/// Loads an edge list with optional feature and label CSVs.
pub fn load_graph(
    edges: impl AsRef<Path>,
    features: Option<&Path>,
    labels: Option<&Path>,
) -> Result<Graph> {
    let (mut g, _) = load_edge_list(edges)?;
    if let Some(path) = features {
        let x = parse_features(&read(path)?, &path.display().to_string())?;
        g = g.with_features(x)?;
    }
    if let Some(path) = labels {
        let l = parse_labels(&read(path)?, g.n(), &path.display().to_string())?;
        g = g.with_labels(l)?;
    }
    Ok(g)
}

/// Reads a LINQS-style citation dump (`<id> <features...> <class>` rows plus
/// `<cited> <citing>` pairs). Publication ids are remapped to `0..n` in content
/// order; class names become label ids in order of first appearance.
pub fn load_linqs(content: impl AsRef<Path>, cites: impl AsRef<Path>) -> Result<(Graph, EdgeListReport)> {
    let (content, cites) = (content.as_ref(), cites.as_ref());
    let origin = content.display().to_string();
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut classes: BTreeMap<String, usize> = BTreeMap::new();
    let mut class_order = 0;
    let mut feats: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (lineno, line) in read(content)?.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: origin.clone(),
            line: lineno + 1,
            msg,
        };
        if fields.len() < 3 {
            return Err(err("expected id, features and class".into()));
        }
        let d = fields.len() - 2;
        if *dim.get_or_insert(d) != d {
            return Err(err(format!("expected {} features, got {d}", dim.unwrap())));
        }
        let id = ids.len();
        ids.insert(fields[0].to_string(), id);
        for f in &fields[1..=d] {
            feats.push(f.parse().map_err(|e| err(format!("bad feature {f:?}: {e}")))?);
        }
        let class = fields[d + 1].to_string();
        let label = *classes.entry(class).or_insert_with(|| {
            class_order += 1;
            class_order - 1
        });
        labels.push(label);
    }
    let n = ids.len();
    let x = Matrix::from_vec(n, dim.unwrap_or(0), feats)?;

    let mut g = Graph::empty(n);
    let mut report = EdgeListReport::default();
    let cites_origin = cites.display().to_string();
    for (lineno, line) in read(cites)?.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [a, b] = fields[..] else {
            return Err(Error::Parse {
                path: cites_origin.clone(),
                line: lineno + 1,
                msg: "expected two publication ids".into(),
            });
        };
        report.raw_edges += 1;
        let (Some(&a), Some(&b)) = (ids.get(a), ids.get(b)) else {
            warn!("{cites_origin}:{}: citation to unknown publication skipped", lineno + 1);
            continue;
        };
        if a == b {
            report.self_loops += 1;
        } else if g.has_edge(a, b) {
            report.duplicates += 1;
        } else {
            g.set_edge(a, b, true);
            report.edges += 1;
        }
    }
    Ok((g.with_features(x)?.with_labels(labels)?, report))
}

/// Reads `user,item[,...]` interaction rows (a header row is skipped) into a
/// bipartite graph. Any interaction, whatever its rating, becomes an edge.
/// Users are numbered first, then items, each in ascending raw-id order.
pub fn load_interactions(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let mut pairs = Vec::new();
    for (lineno, line) in read(path)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                path: origin,
                line: lineno + 1,
                msg: "expected user,item".into(),
            });
        }
        match (fields[0].parse::<u64>(), fields[1].parse::<u64>()) {
            (Ok(u), Ok(i)) => pairs.push((u, i)),
            _ if lineno == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    path: origin,
                    line: lineno + 1,
                    msg: format!("bad ids in {line:?}"),
                })
            }
        }
    }
    let users: BTreeMap<u64, usize> = pairs
        .iter()
        .map(|p| p.0)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(k, u)| (u, k))
        .collect();
    let items: BTreeMap<u64, usize> = pairs
        .iter()
        .map(|p| p.1)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(k, i)| (i, k))
        .collect();
    let (nu, ni) = (users.len(), items.len());
    let mut g = Graph::empty(nu + ni);
    for (u, i) in pairs {
        g.set_edge(users[&u], nu + items[&i], true);
    }
    g.with_bipartite(Bipartite {
        users: nu,
        items: ni,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_chain() {
        let (g, _) = parse_edge_list("0 1\n1 2", "mem").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 2);
        assert!(g.adjacency().is_symmetric());
    }

    #[test]
    fn dedup_and_self_loop() {
        let (g, report) = parse_edge_list("0 1\n1 0\n1 1", "mem").unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(report.raw_edges, 3);
        assert_eq!(report.self_loops, 1);
        assert_eq!(report.duplicates, 1);
    }

    #[test]
    fn header_sets_node_count() {
        let (g, _) = parse_edge_list("#nodes=10\n0 1\n", "mem").unwrap();
        assert_eq!(g.n(), 10);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_edge_list("0 1\n2 x\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_edge_list("0 1\n-3 4\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_edge_list("0 1 2\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn feature_row_count_must_match() {
        let (g, _) = parse_edge_list("0 1\n1 2", "mem").unwrap();
        let x = parse_features("1,0\n0,1\n", "mem").unwrap();
        assert!(matches!(g.with_features(x), Err(Error::Shape { .. })));
    }

    #[test]
    fn labels_with_header() {
        let l = parse_labels("node,label\n1,4\n0,2\n", 2, "mem").unwrap();
        assert_eq!(l, vec![2, 4]);
        assert!(parse_labels("0,1\n", 2, "mem").is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let (g, _) = parse_edge_list("3 1\n0 2\n2 0\n", "mem").unwrap();
        let text = edge_list_string(&g);
        assert_eq!(text, "#nodes=4\n0 2\n1 3\n");
        let (back, _) = parse_edge_list(&text, "mem").unwrap();
        assert_eq!(back, g);
    }
}
