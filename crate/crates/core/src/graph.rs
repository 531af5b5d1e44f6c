//! Undirected binary graphs and edge-level perturbations.
//!
//! A [`Graph`] stores each edge once as an ordered pair `(u, v)` with
//! `u < v`, plus an adjacency-list index for neighborhood queries. Graphs
//! are immutable after construction; every operation returns a new value.
//! Self-loops are rejected everywhere, so the non-edge universe of a graph
//! is exactly the pairs `(u, v)` with `u < v` that are not edges.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Undirected graph over nodes `0..n_nodes` with unweighted edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    /// Sorted, deduplicated edges with `u < v`.
    edges: Vec<(usize, usize)>,
    /// Sorted neighbor list per node.
    adj: Vec<Vec<usize>>,
}

fn order_pair(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl Graph {
    /// Build a graph from an edge iterator. Pairs may appear in either
    /// orientation and more than once; they are symmetrized and
    /// deduplicated. Self-loops and out-of-range endpoints are errors.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::validation(format!("self-loop at node {u}")));
            }
            for e in [u, v] {
                if e >= n_nodes {
                    return Err(Error::Bounds {
                        index: e,
                        n_nodes,
                    });
                }
            }
            set.insert(order_pair(u, v));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adj = vec![Vec::new(); n_nodes];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Graph {
            n_nodes,
            edges,
            adj,
        })
    }

    /// Graph with no edges.
    pub fn empty(n_nodes: usize) -> Self {
        Graph {
            n_nodes,
            edges: Vec::new(),
            adj: vec![Vec::new(); n_nodes],
        }
    }

    /// Complete graph on `n_nodes` nodes.
    pub fn complete(n_nodes: usize) -> Self {
        let edges = (0..n_nodes).flat_map(|u| ((u + 1)..n_nodes).map(move |v| (u, v)));
        Graph::new(n_nodes, edges).expect("complete graph is always valid")
    }

    /// Read an edge list: one `u<TAB>v` pair per line, 0-indexed. Blank
    /// lines are skipped; anything else malformed is a parse error carrying
    /// the line number.
    pub fn from_edge_list_file(path: impl AsRef<Path>, n_nodes: usize) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let file = std::fs::File::open(path)?;
        let mut edges = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut parts = trimmed.split('\t');
            let parse = |field: Option<&str>| -> Result<usize> {
                field
                    .and_then(|s| s.trim().parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse {
                        path: display.clone(),
                        line: idx + 1,
                        message: format!("expected \"u<TAB>v\", got {trimmed:?}"),
                    })
            };
            let u = parse(parts.next())?;
            let v = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse {
                    path: display,
                    line: idx + 1,
                    message: format!("expected exactly two fields, got {trimmed:?}"),
                });
            }
            edges.push((u, v));
        }
        Graph::new(n_nodes, edges)
    }

    /// Write the edge list in the same format `from_edge_list_file` reads.
    pub fn write_edge_list(&self, mut w: impl Write) -> std::io::Result<()> {
        for &(u, v) in &self.edges {
            writeln!(w, "{u}\t{v}")?;
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as ordered pairs `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of unordered non-adjacent pairs.
    pub fn non_edge_count(&self) -> usize {
        self.n_nodes * self.n_nodes.saturating_sub(1) / 2 - self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        if u == v || u >= self.n_nodes || v >= self.n_nodes {
            return false;
        }
        let (u, v) = order_pair(u, v);
        self.edges.binary_search(&(u, v)).is_ok()
    }

    /// Neighbors of `n`, sorted ascending; `n` itself is never included.
    pub fn neighbors(&self, n: usize) -> Result<&[usize]> {
        self.adj
            .get(n)
            .map(Vec::as_slice)
            .ok_or(Error::Bounds {
                index: n,
                n_nodes: self.n_nodes,
            })
    }

    pub fn degree(&self, n: usize) -> Result<usize> {
        self.neighbors(n).map(<[usize]>::len)
    }

    /// SHA-256 of node count and canonical edge list, hex-encoded. Stable
    /// identifier used in manifests to tie derived artifacts to their
    /// source graph.
    pub fn content_hash(&self) -> String {
        let mut text = format!("n={}\n", self.n_nodes);
        for &(u, v) in &self.edges {
            let _ = writeln!(text, "{u}\t{v}");
        }
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Difference `perturbed - self` as insertion/deletion sets.
    pub fn delta_to(&self, perturbed: &Graph) -> Result<PerturbationDelta> {
        PerturbationDelta::between(self, perturbed)
    }

    /// Apply a delta, producing the perturbed graph. The delta must be
    /// consistent: insertions target non-edges, deletions target edges.
    pub fn apply_delta(&self, delta: &PerturbationDelta) -> Result<Graph> {
        if delta.n_nodes != self.n_nodes {
            return Err(Error::shape(format!(
                "delta over {} nodes applied to graph over {}",
                delta.n_nodes, self.n_nodes
            )));
        }
        let mut set: BTreeSet<(usize, usize)> = self.edges.iter().copied().collect();
        for &(u, v) in &delta.insertions {
            if !set.insert((u, v)) {
                return Err(Error::validation(format!(
                    "delta inserts existing edge ({u}, {v})"
                )));
            }
        }
        for &(u, v) in &delta.deletions {
            if !set.remove(&(u, v)) {
                return Err(Error::validation(format!(
                    "delta deletes missing edge ({u}, {v})"
                )));
            }
        }
        Graph::new(self.n_nodes, set)
    }
}

/// Sparse `{-1, 0, +1}` difference between two graphs on the same node set:
/// `+1` entries are inserted edges, `-1` entries deleted ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationDelta {
    n_nodes: usize,
    insertions: Vec<(usize, usize)>,
    deletions: Vec<(usize, usize)>,
}

impl PerturbationDelta {
    /// Delta such that `original.apply_delta(&delta) == perturbed`.
    pub fn between(original: &Graph, perturbed: &Graph) -> Result<Self> {
        if original.n_nodes != perturbed.n_nodes {
            return Err(Error::shape(format!(
                "graphs have {} and {} nodes",
                original.n_nodes, perturbed.n_nodes
            )));
        }
        let a: BTreeSet<_> = original.edges.iter().copied().collect();
        let b: BTreeSet<_> = perturbed.edges.iter().copied().collect();
        Ok(PerturbationDelta {
            n_nodes: original.n_nodes,
            insertions: b.difference(&a).copied().collect(),
            deletions: a.difference(&b).copied().collect(),
        })
    }

    /// Build a delta from explicit insertion/deletion pair lists.
    pub fn new(
        n_nodes: usize,
        insertions: impl IntoIterator<Item = (usize, usize)>,
        deletions: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let normalize = |pairs: &mut Vec<(usize, usize)>| -> Result<()> {
            for pair in pairs.iter_mut() {
                let (u, v) = *pair;
                if u == v {
                    return Err(Error::validation(format!("self-loop at node {u}")));
                }
                if u.max(v) >= n_nodes {
                    return Err(Error::Bounds {
                        index: u.max(v),
                        n_nodes,
                    });
                }
                *pair = order_pair(u, v);
            }
            pairs.sort_unstable();
            pairs.dedup();
            Ok(())
        };
        let mut insertions: Vec<_> = insertions.into_iter().collect();
        let mut deletions: Vec<_> = deletions.into_iter().collect();
        normalize(&mut insertions)?;
        normalize(&mut deletions)?;
        let overlap: Vec<_> = insertions
            .iter()
            .filter(|p| deletions.binary_search(p).is_ok())
            .collect();
        if !overlap.is_empty() {
            return Err(Error::validation(format!(
                "pair {:?} appears in both insertions and deletions",
                overlap[0]
            )));
        }
        Ok(PerturbationDelta {
            n_nodes,
            insertions,
            deletions,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn insertions(&self) -> &[(usize, usize)] {
        &self.insertions
    }

    pub fn deletions(&self) -> &[(usize, usize)] {
        &self.deletions
    }

    pub fn is_empty(&self) -> bool {
        self.insertions.is_empty() && self.deletions.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(n, edges.iter().copied()).unwrap()
    }

    fn edge_file(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    #[test]
    fn load_edge_list_basic() {
        let f = edge_file(&["0\t1", "1\t2"]);
        let g = Graph::from_edge_list_file(f.path(), 3).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn load_edge_list_symmetry_dedup() {
        let f = edge_file(&["0\t1", "1\t0"]);
        let g = Graph::from_edge_list_file(f.path(), 2).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn load_edge_list_out_of_range() {
        let f = edge_file(&["0\t5"]);
        let err = Graph::from_edge_list_file(f.path(), 3).unwrap_err();
        assert!(matches!(err, Error::Bounds { index: 5, n_nodes: 3 }));
    }

    #[test]
    fn load_edge_list_self_loop_rejected() {
        let f = edge_file(&["1\t1"]);
        assert!(matches!(
            Graph::from_edge_list_file(f.path(), 3).unwrap_err(),
            Error::Validation(_)
        ));
    }

    #[test]
    fn load_edge_list_malformed_line_number() {
        let f = edge_file(&["0\t1", "nonsense"]);
        match Graph::from_edge_list_file(f.path(), 3).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn neighborhood_path_graph() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(g.neighbors(1).unwrap(), &[0, 2]);
    }

    #[test]
    fn neighborhood_isolated_node() {
        let g = graph(3, &[(0, 1)]);
        assert!(g.neighbors(2).unwrap().is_empty());
    }

    #[test]
    fn neighborhood_complete_graph() {
        let g = Graph::complete(4);
        assert_eq!(g.neighbors(0).unwrap(), &[1, 2, 3]);
    }

    #[test]
    fn neighborhood_out_of_bounds() {
        let g = graph(3, &[(0, 1)]);
        assert!(matches!(g.neighbors(3), Err(Error::Bounds { .. })));
    }

    #[test]
    fn delta_insertion_only() {
        let a = graph(3, &[(0, 1)]);
        let b = graph(3, &[(0, 1), (1, 2)]);
        let d = PerturbationDelta::between(&a, &b).unwrap();
        assert_eq!(d.insertions(), &[(1, 2)]);
        assert!(d.deletions().is_empty());
    }

    #[test]
    fn delta_identity_is_empty() {
        let a = graph(3, &[(0, 1)]);
        let d = PerturbationDelta::between(&a, &a).unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn delta_mixed() {
        let a = graph(3, &[(0, 1)]);
        let b = graph(3, &[(1, 2)]);
        let d = PerturbationDelta::between(&a, &b).unwrap();
        assert_eq!(d.insertions(), &[(1, 2)]);
        assert_eq!(d.deletions(), &[(0, 1)]);
    }

    #[test]
    fn delta_shape_mismatch() {
        let a = graph(3, &[(0, 1)]);
        let b = graph(4, &[(0, 1)]);
        assert!(matches!(
            PerturbationDelta::between(&a, &b),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn apply_delta_insert() {
        let g = graph(3, &[(0, 1)]);
        let d = PerturbationDelta::new(3, [(1, 2)], []).unwrap();
        assert_eq!(g.apply_delta(&d).unwrap().edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn apply_delta_delete_to_empty() {
        let g = graph(2, &[(0, 1)]);
        let d = PerturbationDelta::new(2, [], [(0, 1)]).unwrap();
        assert_eq!(g.apply_delta(&d).unwrap().edge_count(), 0);
    }

    #[test]
    fn apply_delta_conflict() {
        let g = graph(2, &[(0, 1)]);
        let d = PerturbationDelta::new(2, [(0, 1)], []).unwrap();
        assert!(matches!(g.apply_delta(&d), Err(Error::Validation(_))));
    }

    #[test]
    fn delta_overlapping_sets_rejected() {
        assert!(PerturbationDelta::new(3, [(0, 1)], [(1, 0)]).is_err());
    }

    #[test]
    fn content_hash_ignores_edge_orientation() {
        let a = Graph::new(3, [(1, 0), (2, 1)]).unwrap();
        let b = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), Graph::empty(3).content_hash());
    }
}
