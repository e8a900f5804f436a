//! Directed-graph store with edge-list ingestion.
//!
//! Node ids are dense integers in `[0, node_count)`. Files use the SNAP
//! edge-list convention: UTF-8 text, `#` comments, `src dst` per line.
//! Loading remaps arbitrary ids densely in first-appearance order and keeps
//! the originals in a side table for reporting.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};

/// Index into [`DirectedGraph::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

/// Immutable directed graph. Safe for concurrent reads after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    node_count: usize,
    /// (giving, receiving) pairs; no self-loops, no duplicates.
    edges: Vec<(usize, usize)>,
    out_adjacency: Vec<Vec<usize>>,
    in_adjacency: Vec<Vec<usize>>,
    /// Original file ids, indexed by dense id. Identity for synthetic graphs.
    original_ids: Vec<u64>,
}

/// Counts of lines dropped while loading an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicates_deduped: usize,
}

impl DirectedGraph {
    /// Build from already-dense edges. Self-loops and duplicates are rejected.
    pub fn from_edges(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &edges {
            if u >= node_count || v >= node_count {
                return Err(Error::NodeOutOfRange(u.max(v), node_count));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop on node {u}")));
            }
            if !seen.insert((u, v)) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({u}, {v})")));
            }
        }
        let mut out_adjacency = vec![Vec::new(); node_count];
        let mut in_adjacency = vec![Vec::new(); node_count];
        for (i, &(u, v)) in edges.iter().enumerate() {
            out_adjacency[u].push(i);
            in_adjacency[v].push(i);
        }
        Ok(Self {
            node_count,
            edges,
            out_adjacency,
            in_adjacency,
            original_ids: (0..node_count as u64).collect(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// (giving, receiving) endpoints of an edge.
    pub fn endpoints(&self, e: EdgeId) -> (usize, usize) {
        self.edges[e.0]
    }

    pub fn giving(&self, e: EdgeId) -> usize {
        self.edges[e.0].0
    }

    pub fn receiving(&self, e: EdgeId) -> usize {
        self.edges[e.0].1
    }

    /// Out-edge ids of `v`, in construction order.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_adjacency[v]
    }

    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.in_adjacency[v]
    }

    pub fn original_id(&self, v: usize) -> u64 {
        self.original_ids[v]
    }

    /// Per-node (out-degree, in-degree).
    pub fn degrees(&self) -> Vec<(usize, usize)> {
        (0..self.node_count)
            .map(|v| (self.out_adjacency[v].len(), self.in_adjacency[v].len()))
            .collect()
    }

    /// Parse a SNAP-style edge list. Ids are remapped densely in
    /// first-appearance order; self-loops and duplicate pairs are dropped
    /// and counted in the report.
    pub fn load_edge_list<R: BufRead>(reader: R) -> Result<(Self, LoadReport)> {
        let mut id_map: HashMap<u64, usize> = HashMap::new();
        let mut original_ids = Vec::new();
        let mut dense = |raw: u64| -> usize {
            *id_map.entry(raw).or_insert_with(|| {
                original_ids.push(raw);
                original_ids.len() - 1
            })
        };
        let mut edges = Vec::new();
        let mut edge_set = std::collections::HashSet::new();
        let mut report = LoadReport::default();
        let mut saw_data = false;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            saw_data = true;
            let mut tokens = trimmed.split_whitespace();
            let parse = |tok: Option<&str>, lineno: usize| -> Result<u64> {
                let tok = tok.ok_or(Error::Parse {
                    line: lineno + 1,
                    message: "expected two integers".into(),
                })?;
                tok.parse::<u64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("non-integer token {tok:?}"),
                })
            };
            let src = parse(tokens.next(), lineno)?;
            let dst = parse(tokens.next(), lineno)?;
            if tokens.next().is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "expected exactly two tokens".into(),
                });
            }
            let u = dense(src);
            let v = dense(dst);
            if u == v {
                report.self_loops_dropped += 1;
                continue;
            }
            if !edge_set.insert((u, v)) {
                report.duplicates_deduped += 1;
                continue;
            }
            edges.push((u, v));
        }
        if !saw_data {
            return Err(Error::EmptyInput);
        }
        let graph = Self::from_edges(original_ids.len(), edges)?;
        Ok((
            Self {
                original_ids,
                ..graph
            },
            report,
        ))
    }

    /// Emit the edge list sorted by (giving, receiving), in dense ids.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        let mut sorted = self.edges.clone();
        sorted.sort_unstable();
        for (u, v) in sorted {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    /// Duplicate every edge in both directions (for undirected datasets).
    /// Already-present reverse edges are not duplicated twice.
    pub fn symmetrized(&self) -> Self {
        let mut edge_set: std::collections::HashSet<(usize, usize)> =
            self.edges.iter().copied().collect();
        let mut edges = self.edges.clone();
        for &(u, v) in &self.edges {
            if edge_set.insert((v, u)) {
                edges.push((v, u));
            }
        }
        let mut g = Self::from_edges(self.node_count, edges).expect("symmetrized edges valid");
        g.original_ids = self.original_ids.clone();
        g
    }

    /// Copy of this graph with the given edges removed (ids re-assigned).
    pub fn without_edges(&self, removed: &std::collections::HashSet<usize>) -> Self {
        let edges: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, &e)| e)
            .collect();
        let mut g = Self::from_edges(self.node_count, edges).expect("subset of valid edges");
        g.original_ids = self.original_ids.clone();
        g
    }
}

/// Seeded Erdos-Renyi-style directed G(n, m): m distinct ordered pairs
/// sampled uniformly without self-loops.
pub fn random_graph<R: Rng>(n: usize, m: usize, rng: &mut R) -> Result<DirectedGraph> {
    let max_edges = n.saturating_mul(n.saturating_sub(1));
    if m > max_edges {
        return Err(Error::InvalidArgument(format!(
            "cannot place {m} edges in a {n}-node simple directed graph (max {max_edges})"
        )));
    }
    let mut edge_set = std::collections::HashSet::new();
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && edge_set.insert((u, v)) {
            edges.push((u, v));
        }
    }
    DirectedGraph::from_edges(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive, Stream};
    use std::io::Cursor;

    fn load(text: &str) -> (DirectedGraph, LoadReport) {
        DirectedGraph::load_edge_list(Cursor::new(text)).unwrap()
    }

    #[test]
    fn loads_simple_list_with_comment() {
        let (g, report) = load("# c\n0 1\n1 2");
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(report, LoadReport::default());
    }

    #[test]
    fn drops_self_loops_and_duplicates() {
        let (g, report) = load("0 0\n0 1\n0 1");
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(report.self_loops_dropped, 1);
        assert_eq!(report.duplicates_deduped, 1);
    }

    #[test]
    fn dense_remap_first_appearance_order() {
        let (g, _) = load("5 9\n9 5");
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), &[(0, 1), (1, 0)]);
        assert_eq!(g.original_id(0), 5);
        assert_eq!(g.original_id(1), 9);
    }

    #[test]
    fn malformed_lines_report_line_number() {
        let err = DirectedGraph::load_edge_list(Cursor::new("0 1\nx 2")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
        let err = DirectedGraph::load_edge_list(Cursor::new("0 1 2")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(matches!(
            DirectedGraph::load_edge_list(Cursor::new("# only comments\n")).unwrap_err(),
            Error::EmptyInput
        ));
    }

    #[test]
    fn degrees_star_empty_path() {
        let (star, _) = load("0 1\n0 2\n0 3");
        assert_eq!(star.degrees(), vec![(3, 0), (0, 1), (0, 1), (0, 1)]);

        let empty = DirectedGraph::from_edges(3, vec![]).unwrap();
        assert_eq!(empty.degrees(), vec![(0, 0); 3]);

        let (path, _) = load("0 1\n1 2");
        assert_eq!(path.degrees()[1], (1, 1));
    }

    #[test]
    fn edge_list_round_trip() {
        let (g, _) = load("3 1\n1 2\n2 3\n0 3");
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let (g2, _) = DirectedGraph::load_edge_list(Cursor::new(buf)).unwrap();
        // Reload remaps ids, but the edge relation is preserved up to the
        // dense-id permutation; sorted serializations must agree.
        let mut buf2 = Vec::new();
        g2.write_edge_list(&mut buf2).unwrap();
        let mut buf1 = Vec::new();
        g.write_edge_list(&mut buf1).unwrap();
        assert_eq!(g.node_count(), g2.node_count());
        assert_eq!(g.edge_count(), g2.edge_count());
        assert_eq!(
            g2.degrees().iter().map(|d| d.0).sum::<usize>(),
            g2.edge_count()
        );
        assert_eq!(buf1, buf2);
    }

    #[test]
    fn symmetrize_doubles_one_way_edges() {
        let (g, _) = load("0 1\n1 0\n1 2");
        let s = g.symmetrized();
        assert_eq!(s.edge_count(), 4);
    }

    #[test]
    fn random_graph_adjacency_matches_linear_scan() {
        let mut rng = derive(11, Stream::GroundTruth, 0, 0);
        for _ in 0..10 {
            let g = random_graph(20, 60, &mut rng).unwrap();
            assert_eq!(g.edge_count(), 60);
            let degs = g.degrees();
            assert_eq!(degs.iter().map(|d| d.0).sum::<usize>(), 60);
            assert_eq!(degs.iter().map(|d| d.1).sum::<usize>(), 60);
            for v in 0..g.node_count() {
                let scan: Vec<usize> = g
                    .edges()
                    .iter()
                    .enumerate()
                    .filter(|(_, &(u, _))| u == v)
                    .map(|(i, _)| i)
                    .collect();
                assert_eq!(g.out_edges(v), scan.as_slice());
                let scan_in: Vec<usize> = g
                    .edges()
                    .iter()
                    .enumerate()
                    .filter(|(_, &(_, w))| w == v)
                    .map(|(i, _)| i)
                    .collect();
                assert_eq!(g.in_edges(v), scan_in.as_slice());
            }
        }
    }
}
