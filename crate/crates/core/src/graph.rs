//! Undirected graphs from edge lists, degree filtering and Laplacians.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Simple undirected graph on nodes `0..n` with original labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    /// `labels[i]` is the id node `i` had in the input.
    labels: Vec<u64>,
    /// Sorted unique edges `(u, v)` with `u < v`.
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from labelled edges. Self-loops are ignored (their
    /// endpoint still becomes a node) and duplicates collapse.
    pub fn from_edges(edges: &[(u64, u64)]) -> Self {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut labels = Vec::new();
        let mut id = |x: u64, labels: &mut Vec<u64>| {
            *index.entry(x).or_insert_with(|| {
                labels.push(x);
                labels.len() - 1
            })
        };
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            let (u, v) = (id(a, &mut labels), id(b, &mut labels));
            if u != v {
                set.insert((u.min(v), u.max(v)));
            }
        }
        Graph {
            labels,
            edges: set.into_iter().collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Keeps the nodes where `keep` is true, renumbered in order.
    fn induced(&self, keep: &[bool]) -> Graph {
        let mut map = vec![usize::MAX; self.node_count()];
        let mut labels = Vec::new();
        for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            map[i] = labels.len();
            labels.push(self.labels[i]);
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v)| keep[u] && keep[v])
            .map(|&(u, v)| (map[u], map[v]))
            .collect();
        Graph { labels, edges }
    }

    /// Deletes nodes of degree below `n0` with their edges, then deletes
    /// the nodes this left isolated. One pass, not iterated.
    pub fn filter_min_degree(&self, n0: usize) -> Graph {
        let deg = self.degrees();
        let keep: Vec<bool> = deg.iter().map(|&k| k >= n0).collect();
        let g = self.induced(&keep);
        let deg = g.degrees();
        let keep: Vec<bool> = deg.iter().map(|&k| k > 0).collect();
        g.induced(&keep)
    }

    /// `L = Deg − Adj`.
    pub fn laplacian(&self) -> SparseMatrix {
        let n = self.node_count();
        let deg = self.degrees();
        let mut trip = Vec::with_capacity(n + 2 * self.edges.len());
        for (i, &k) in deg.iter().enumerate() {
            trip.push((i, i, k as f64));
        }
        for &(u, v) in &self.edges {
            trip.push((u, v, -1.0));
            trip.push((v, u, -1.0));
        }
        SparseMatrix::from_triplets(n, n, &trip).expect("indices are in range")
    }

    /// Number of connected components and a component id per node.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.node_count();
        let mut uf = UnionFind::new(n);
        for &(u, v) in &self.edges {
            uf.union(u, v);
        }
        let mut ids = HashMap::new();
        let labels: Vec<usize> = (0..n)
            .map(|i| {
                let r = uf.find(i);
                let next = ids.len();
                *ids.entry(r).or_insert(next)
            })
            .collect();
        (ids.len(), labels)
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Parses a whitespace-separated edge list, one `u v` pair per line.
/// Blank lines and lines starting with `#` or `%` are skipped; anything
/// after the second field is ignored (weights, timestamps).
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Vec<(u64, u64)>> {
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut field = |name: &str| -> Result<u64> {
            let tok = it.next().ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("missing {name} node"),
            })?;
            tok.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid node id '{tok}'"),
            })
        };
        let u = field("first")?;
        let v = field("second")?;
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn read_edge_list_file(path: impl AsRef<Path>) -> Result<Vec<(u64, u64)>> {
    parse_edge_list(BufReader::new(File::open(path)?))
}
