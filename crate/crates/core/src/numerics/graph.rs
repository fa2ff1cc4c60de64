//! Sparse weighted graphs and geodesic (shortest-path) distances.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::matrix::DenseMatrix;

#[derive(Debug, Clone, Default)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adj[u]
    }

    pub fn add_edge(&mut self, u: usize, v: usize, w: f64) -> Result<()> {
        let n = self.adj.len();
        if u >= n || v >= n {
            return Err(Error::Argument(format!(
                "edge ({u}, {v}) out of range for {n} nodes"
            )));
        }
        if !(w >= 0.0) || w.is_infinite() {
            return Err(Error::Argument(format!(
                "edge ({u}, {v}) has invalid weight {w}; weights must be finite and >= 0"
            )));
        }
        self.adj[u].push((v, w));
        Ok(())
    }

    pub fn add_undirected_edge(&mut self, u: usize, v: usize, w: f64) -> Result<()> {
        self.add_edge(u, v, w)?;
        if u != v {
            self.add_edge(v, u, w)?;
        }
        Ok(())
    }

    /// Connected components (edges treated as undirected), each sorted, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.adj.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for u in 0..n {
            for &(v, _) in &self.adj[u] {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru.max(rv)] = ru.min(rv);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for u in 0..n {
            let r = find(&mut parent, u);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(u);
        }
        groups
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Single-source Dijkstra; unreachable nodes get `f64::INFINITY`.
pub fn dijkstra(graph: &WeightedGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    dist
}

/// Geodesic distance matrix with unreachable pairs flagged as `f64::INFINITY`.
///
/// Sources run in parallel; each writes only its own row.
pub fn shortest_path_distances(graph: &WeightedGraph) -> DenseMatrix {
    let n = graph.len();
    let mut out = DenseMatrix::zeros(n, n);
    if n == 0 {
        return out;
    }
    out.data_mut()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(s, row)| row.copy_from_slice(&dijkstra(graph, s)));
    out
}

/// Like [`shortest_path_distances`], but a disconnected graph is an error
/// listing its components.
pub fn all_pairs_shortest_paths(graph: &WeightedGraph) -> Result<DenseMatrix> {
    let components = graph.components();
    if components.len() > 1 {
        return Err(Error::Disconnected {
            components,
            hint: None,
        });
    }
    Ok(shortest_path_distances(graph))
}
