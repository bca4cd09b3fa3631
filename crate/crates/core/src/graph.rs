//! Compressed undirected simple graphs and their edge-weighted variant.

use std::collections::VecDeque;

use crate::error::{Result, TadaError};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Immutable undirected simple graph in CSR form.
///
/// Every undirected edge `{u, v}` is stored in both adjacency lists. Edges are
/// also numbered: edge id `e` is the position of `(min, max)` in the
/// lexicographically sorted edge list, which is the tie-break order used by
/// the sparsifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    /// Undirected edge id for each adjacency slot (parallel to `neighbors`).
    slot_edge: Vec<usize>,
    /// Endpoints `(u, v)` with `u < v`, sorted lexicographically.
    edges: Vec<(usize, usize)>,
}

/// What the builder dropped while normalizing the input edge multiset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct BuildReport {
    pub duplicates: usize,
    pub self_loops: usize,
}

impl Graph {
    /// Builds a simple undirected graph on `n` nodes.
    ///
    /// Self-loops and repeated edges (in either orientation) are dropped and
    /// counted in the returned report.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<(Self, BuildReport)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut report = BuildReport::default();
        let mut canon = Vec::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(TadaError::NodeOutOfRange { id, n });
                }
            }
            if u == v {
                report.self_loops += 1;
                continue;
            }
            canon.push((u.min(v), u.max(v)));
        }
        canon.sort_unstable();
        let before = canon.len();
        canon.dedup();
        report.duplicates = before - canon.len();
        Ok((Self::from_sorted_unique(n, canon), report))
    }

    /// `edges` must be sorted, deduplicated, with `u < v < n`.
    fn from_sorted_unique(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(u, v) in &edges {
            offsets[u + 1] += 1;
            offsets[v + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        // Rows are filled in ascending neighbor order: for row `v`, all
        // smaller neighbors `u` arrive (in ascending u) before any larger one.
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        let mut slot_edge = vec![0usize; 2 * edges.len()];
        // Pass 1 fills the "smaller neighbor" part of every row.
        for (e, &(u, v)) in edges.iter().enumerate() {
            neighbors[cursor[v]] = u;
            slot_edge[cursor[v]] = e;
            cursor[v] += 1;
        }
        // Pass 2 fills the "larger neighbor" part; edges are sorted by u then v.
        for (e, &(u, v)) in edges.iter().enumerate() {
            neighbors[cursor[u]] = v;
            slot_edge[cursor[u]] = e;
            cursor[u] += 1;
        }
        Self {
            offsets,
            neighbors,
            slot_edge,
            edges,
        }
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self::from_sorted_unique(n, Vec::new())
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.node_count()).map(|i| self.degree(i)).collect()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Edge ids of the slots in `neighbors(i)`, position-aligned.
    #[inline]
    pub fn neighbor_edge_ids(&self, i: usize) -> &[usize] {
        &self.slot_edge[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    #[inline]
    pub fn adjacency(&self) -> &[usize] {
        &self.neighbors
    }

    /// Edges `(u, v)`, `u < v`, indexed by edge id.
    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        let pos = self.neighbors(u).binary_search(&v).ok()?;
        Some(self.neighbor_edge_ids(u)[pos])
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn isolated_count(&self) -> usize {
        (0..self.node_count()).filter(|&i| self.degree(i) == 0).count()
    }

    pub fn to_dense<T: Scalar>(&self) -> DenseMatrix<T> {
        let n = self.node_count();
        let mut a = DenseMatrix::zeros(n, n);
        for &(u, v) in &self.edges {
            a[(u, v)] = T::one();
            a[(v, u)] = T::one();
        }
        a
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// Two-coloring BFS over every component.
    pub fn is_bipartite(&self) -> bool {
        let n = self.node_count();
        let mut color: Vec<Option<bool>> = vec![None; n];
        for start in 0..n {
            if color[start].is_some() {
                continue;
            }
            color[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let cu = color[u].expect("colored on push");
                for &v in self.neighbors(u) {
                    match color[v] {
                        None => {
                            color[v] = Some(!cu);
                            queue.push_back(v);
                        }
                        Some(cv) if cv == cu => return false,
                        Some(_) => {}
                    }
                }
            }
        }
        true
    }
}

/// Row access shared by the unweighted and weighted graph types, so one
/// propagation kernel serves both.
pub trait Adjacency<T: Scalar> {
    fn node_count(&self) -> usize;

    /// Calls `f(j, a_ij)` for every stored neighbor `j` of `i`, ascending.
    fn for_each_neighbor<F: FnMut(usize, T)>(&self, i: usize, f: F);

    /// Row sum of the adjacency (`d(v_i)` or `d_w(v_i)`).
    fn row_degree(&self, i: usize) -> T;
}

impl<T: Scalar> Adjacency<T> for Graph {
    #[inline]
    fn node_count(&self) -> usize {
        Graph::node_count(self)
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(usize, T)>(&self, i: usize, mut f: F) {
        for &j in self.neighbors(i) {
            f(j, T::one());
        }
    }

    #[inline]
    fn row_degree(&self, i: usize) -> T {
        T::of_usize(self.degree(i))
    }
}

/// Graph with a positive weight per undirected edge and cached weighted degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph<T> {
    base: Graph,
    edge_weights: Vec<T>,
    weighted_degrees: Vec<T>,
}

impl<T: Scalar> WeightedGraph<T> {
    /// `edge_weights[e]` is the weight of `base.edges()[e]`.
    pub fn new(base: Graph, edge_weights: Vec<T>) -> Result<Self> {
        if edge_weights.len() != base.edge_count() {
            return Err(TadaError::DimensionMismatch {
                what: "edge weights",
                expected: base.edge_count(),
                found: edge_weights.len(),
            });
        }
        if edge_weights.iter().any(|w| !w.is_finite()) {
            return Err(TadaError::NonFinite("edge weights"));
        }
        let mut weighted_degrees = vec![T::zero(); base.node_count()];
        for (&(u, v), &w) in base.edges().iter().zip(&edge_weights) {
            weighted_degrees[u] += w;
            weighted_degrees[v] += w;
        }
        Ok(Self {
            base,
            edge_weights,
            weighted_degrees,
        })
    }

    /// Every edge weighted 1, so `d_w = d`.
    pub fn unit(base: Graph) -> Self {
        let w = vec![T::one(); base.edge_count()];
        Self::new(base, w).expect("unit weights are valid")
    }

    /// Builds from `(u, v, w)` triples; duplicate pairs are rejected.
    pub fn from_weighted_edges(n: usize, triples: &[(usize, usize, T)]) -> Result<Self> {
        let (base, report) = Graph::from_edges(n, triples.iter().map(|&(u, v, _)| (u, v)))?;
        if report.duplicates > 0 || report.self_loops > 0 {
            return Err(TadaError::invalid(
                "weighted edge list contains duplicate edges or self-loops",
            ));
        }
        let mut weights = vec![T::zero(); base.edge_count()];
        for &(u, v, w) in triples {
            let e = base.edge_id(u, v).expect("edge inserted above");
            weights[e] = w;
        }
        Self::new(base, weights)
    }

    #[inline]
    pub fn base(&self) -> &Graph {
        &self.base
    }

    #[inline]
    pub fn edge_weights(&self) -> &[T] {
        &self.edge_weights
    }

    #[inline]
    pub fn weighted_degrees(&self) -> &[T] {
        &self.weighted_degrees
    }

    #[inline]
    pub fn weighted_degree(&self, i: usize) -> T {
        self.weighted_degrees[i]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<T> {
        self.base.edge_id(u, v).map(|e| self.edge_weights[e])
    }

    /// Iterates `(u, v, w)` in edge-id order.
    pub fn weighted_edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.base
            .edges()
            .iter()
            .zip(&self.edge_weights)
            .map(|(&(u, v), &w)| (u, v, w))
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let n = self.base.node_count();
        let mut a = DenseMatrix::zeros(n, n);
        for (u, v, w) in self.weighted_edges() {
            a[(u, v)] = w;
            a[(v, u)] = w;
        }
        a
    }
}

impl<T: Scalar> Adjacency<T> for WeightedGraph<T> {
    #[inline]
    fn node_count(&self) -> usize {
        self.base.node_count()
    }

    #[inline]
    fn for_each_neighbor<F: FnMut(usize, T)>(&self, i: usize, mut f: F) {
        for (&j, &e) in self.base.neighbors(i).iter().zip(self.base.neighbor_edge_ids(i)) {
            f(j, self.edge_weights[e]);
        }
    }

    #[inline]
    fn row_degree(&self, i: usize) -> T {
        self.weighted_degrees[i]
    }
}
