//! Attribute-aware edge reweighting and centrality-based edge removal.
//!
//! Each edge gets `w = clamp(cos(H_i, H_j), ε, 1)`, then centrality
//! `C_w = w · (1/d_w(i) + 1/d_w(j))`, a cheap stand-in for effective
//! resistance. The `⌊mρ⌋` edges lowest in `(C_w, edge id)` order are dropped.

use std::cmp::Ordering;
use std::io::Write;

use serde::Serialize;

use crate::error::{Result, TadaError};
use crate::graph::{Graph, WeightedGraph};
use crate::matrix::{dot, DenseMatrix};
use crate::scalar::Scalar;

pub const WEIGHT_FLOOR: f64 = 1e-8;

/// Cosine of two rows, clamped to `[ε, 1]`. Zero rows give `ε`.
pub fn clamped_cosine<T: Scalar>(a: &[T], b: &[T]) -> T {
    let eps = T::of(WEIGHT_FLOOR);
    let na = dot(a, a);
    let nb = dot(b, b);
    if na <= T::zero() || nb <= T::zero() {
        return eps;
    }
    let c = dot(a, b) / (na * nb).sqrt();
    if c.is_nan() {
        return eps;
    }
    c.max(eps).min(T::one())
}

pub fn reweight_edges<T: Scalar>(g: &Graph, h0: &DenseMatrix<T>) -> Result<WeightedGraph<T>> {
    if h0.rows() != g.node_count() {
        return Err(TadaError::DimensionMismatch {
            what: "H0 rows",
            expected: g.node_count(),
            found: h0.rows(),
        });
    }
    h0.ensure_finite("H0")?;
    let w = g.edges().iter().map(|&(u, v)| clamped_cosine(h0.row(u), h0.row(v))).collect();
    WeightedGraph::new(g.clone(), w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCentrality<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> EdgeCentrality<T> {
    fn cmp(&self, a: usize, b: usize) -> Ordering {
        self.values[a]
            .partial_cmp(&self.values[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }

    /// Every edge id, ascending by `(C_w, id)`.
    pub fn ranking(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.values.len()).collect();
        ids.sort_by(|&a, &b| self.cmp(a, b));
        ids
    }

    /// The `count` lowest edges in ranking order, without sorting the rest.
    pub fn bottom(&self, count: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.values.len()).collect();
        if count == 0 {
            return Vec::new();
        }
        if count < ids.len() {
            ids.select_nth_unstable_by(count - 1, |&a, &b| self.cmp(a, b));
            ids.truncate(count);
        }
        ids.sort_by(|&a, &b| self.cmp(a, b));
        ids
    }
}

pub fn edge_centralities<T: Scalar>(wg: &WeightedGraph<T>) -> EdgeCentrality<T> {
    let d = wg.weighted_degrees();
    let values = wg
        .weighted_edges()
        .map(|(u, v, w)| w * (d[u].recip() + d[v].recip()))
        .collect();
    EdgeCentrality { values }
}

/// `⌊mρ⌋`.
pub fn removal_count(m: usize, rho: f64) -> usize {
    ((m as f64) * rho).floor() as usize
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SparsifyStats {
    pub m_before: usize,
    pub m_removed: usize,
    pub rho: f64,
    pub isolated_nodes: usize,
    /// Survivor weights in ten equal bins over `[0, 1]`.
    pub weight_histogram: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SparsifiedGraph<T> {
    pub graph: WeightedGraph<T>,
    /// Original edge ids of removed edges, in ranking order.
    pub removed: Vec<usize>,
    pub rho: f64,
    pub m_before: usize,
}

impl<T: Scalar> SparsifiedGraph<T> {
    pub fn stats(&self) -> SparsifyStats {
        let mut hist = vec![0usize; 10];
        for &w in self.graph.edge_weights() {
            let b = (w.to_f64_lossy() * 10.0).floor().clamp(0.0, 9.0) as usize;
            hist[b] += 1;
        }
        SparsifyStats {
            m_before: self.m_before,
            m_removed: self.removed.len(),
            rho: self.rho,
            isolated_nodes: self.graph.base().isolated_count(),
            weight_histogram: hist,
        }
    }

    pub fn write_edges<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_weighted_edge_list(&self.graph, w)
    }
}

pub fn sparsify<T: Scalar>(wg: &WeightedGraph<T>, rho: f64) -> Result<SparsifiedGraph<T>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(TadaError::invalid(format!("rho must lie in [0, 1), got {rho}")));
    }
    let m = wg.base().edge_count();
    let removed = edge_centralities(wg).bottom(removal_count(m, rho));
    let mut keep = vec![true; m];
    for &e in &removed {
        keep[e] = false;
    }
    let edges = wg.base().edges();
    let (base, _) = Graph::from_edges(
        wg.base().node_count(),
        (0..m).filter(|&e| keep[e]).map(|e| edges[e]),
    )?;
    let weights = (0..m).filter(|&e| keep[e]).map(|e| wg.edge_weights()[e]).collect();
    Ok(SparsifiedGraph {
        graph: WeightedGraph::new(base, weights)?,
        removed,
        rho,
        m_before: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn unit(n: usize, edges: &[(usize, usize)]) -> WeightedGraph<f64> {
        WeightedGraph::unit(Graph::from_edges(n, edges.iter().copied()).unwrap().0)
    }

    #[test]
    fn identical_rows_give_unit_weights() {
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap().0;
        let h = DenseMatrix::from_fn(4, 3, |_, c| [0.3, -1.7, 2.9][c]);
        let wg = reweight_edges(&g, &h).unwrap();
        assert!(wg.edge_weights().iter().all(|&w| w == 1.0));
        for i in 0..4 {
            assert_eq!(wg.weighted_degree(i), g.degree(i) as f64);
        }
    }

    #[test]
    fn orthogonal_opposite_and_zero_rows_clamp() {
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap().0;
        let h = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [-3.0, 0.0], [0.0, 0.0]]).unwrap();
        let wg = reweight_edges(&g, &h).unwrap();
        assert_eq!(wg.edge_weights(), &[WEIGHT_FLOOR; 3]);
        assert!(reweight_edges(&g, &DenseMatrix::<f64>::zeros(3, 2)).is_err());
        let bad = DenseMatrix::from_rows(&[[f64::NAN], [1.0], [1.0], [1.0]]).unwrap();
        assert!(reweight_edges(&g, &bad).is_err());
    }

    #[test]
    fn centrality_examples() {
        let c = edge_centralities(&unit(3, &[(0, 1), (1, 2)]));
        assert_eq!(c.values, vec![1.5, 1.5]);
        let c = edge_centralities(&unit(3, &[(0, 1), (1, 2), (0, 2)]));
        assert_eq!(c.values, vec![1.0; 3]);
        let c = edge_centralities(&unit(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]));
        assert_eq!(c.values, vec![1.25; 4]);
    }

    #[test]
    fn sparsify_examples() {
        let tri = unit(3, &[(0, 1), (1, 2), (0, 2)]);
        let s = sparsify(&tri, 0.0).unwrap();
        assert!(s.removed.is_empty());
        assert_eq!(s.graph, tri);
        let s = sparsify(&tri, 1.0 / 3.0).unwrap();
        assert_eq!(s.removed, vec![0]);
        assert_eq!(s.graph.base().edges(), &[(0, 2), (1, 2)]);
        assert!(sparsify(&tri, 1.0).is_err());
        assert!(sparsify(&tri, -0.1).is_err());
    }

    #[test]
    fn star_with_chain_matches_full_sort() {
        let wg = unit(7, &[(0, 1), (0, 2), (0, 3), (0, 4), (4, 5), (5, 6)]);
        let s = sparsify(&wg, 0.34).unwrap();
        let c = edge_centralities(&wg);
        assert_eq!(s.removed, c.ranking()[..2].to_vec());
        let e4 = wg.base().edge_id(0, 4).unwrap();
        let e45 = wg.base().edge_id(4, 5).unwrap();
        assert_eq!(s.removed, vec![e4, e45]);
    }

    #[test]
    fn stats_count_isolated_nodes() {
        let wg = unit(4, &[(0, 1), (1, 2), (2, 3)]);
        let s = sparsify(&wg, 0.5).unwrap();
        let st = s.stats();
        assert_eq!(st.m_before, 3);
        assert_eq!(st.m_removed, 1);
        assert_eq!(st.weight_histogram[9], 2);
        // middle edge has the lowest centrality, leaving no node isolated
        assert_eq!(s.removed, vec![1]);
        assert_eq!(st.isolated_nodes, 0);
        let json = serde_json::to_value(&st).unwrap();
        assert_eq!(json["m_removed"], 1);
    }

    fn arb_weighted() -> impl Strategy<Value = WeightedGraph<f64>> {
        (2usize..60).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n, 1e-8f64..=1.0), 1..(4 * n)).prop_filter_map(
                "needs an edge",
                move |es| {
                    let (g, _) = Graph::from_edges(n, es.iter().map(|&(u, v, _)| (u, v))).ok()?;
                    let w = (0..g.edge_count()).map(|e| es[e % es.len()].2).collect();
                    WeightedGraph::new(g, w).ok()
                },
            )
        })
    }

    fn arb_features() -> impl Strategy<Value = (Graph, DenseMatrix<f64>)> {
        (3usize..50).prop_flat_map(|n| {
            (
                proptest::collection::vec((0..n, 0..n), 1..(3 * n)),
                proptest::collection::vec(-1.0f64..1.0, n * 4),
            )
                .prop_filter_map("needs an edge", move |(es, h)| {
                    let g = Graph::from_edges(n, es).ok()?.0;
                    Some((g, DenseMatrix::from_vec(n, 4, h).unwrap()))
                })
        })
    }

    proptest! {
        #[test]
        fn removal_matches_full_sort(wg in arb_weighted(), rho in 0.0f64..0.999) {
            let s = sparsify(&wg, rho).unwrap();
            let k = removal_count(wg.base().edge_count(), rho);
            prop_assert_eq!(s.removed.len(), k);
            prop_assert_eq!(&s.removed, &edge_centralities(&wg).ranking()[..k].to_vec());
            prop_assert_eq!(s.graph.base().edge_count() + k, wg.base().edge_count());
        }

        #[test]
        fn removal_sets_nest(wg in arb_weighted(), a in 0.0f64..0.999, b in 0.0f64..0.999) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small: BTreeSet<_> = sparsify(&wg, lo).unwrap().removed.into_iter().collect();
            let large: BTreeSet<_> = sparsify(&wg, hi).unwrap().removed.into_iter().collect();
            prop_assert!(small.is_subset(&large));
        }

        #[test]
        fn survivors_keep_weights_and_symmetry((g, h) in arb_features(), rho in 0.0f64..0.999) {
            let wg = reweight_edges(&g, &h).unwrap();
            let s = sparsify(&wg, rho).unwrap();
            let a = s.graph.to_dense();
            prop_assert!(a.is_symmetric(0.0));
            for (u, v, w) in s.graph.weighted_edges() {
                prop_assert_eq!(Some(w), wg.weight(u, v));
                prop_assert!((WEIGHT_FLOOR..=1.0).contains(&w));
            }
            let d = s.graph.weighted_degrees();
            for i in 0..g.node_count() {
                let sum: f64 = s.graph.base().neighbor_edge_ids(i).iter().map(|&e| s.graph.edge_weights()[e]).sum();
                prop_assert!((d[i] - sum).abs() <= 1e-9);
            }
        }

        #[test]
        fn centrality_formula((g, h) in arb_features()) {
            let wg = reweight_edges(&g, &h).unwrap();
            let c = edge_centralities(&wg);
            for (e, (u, v, w)) in wg.weighted_edges().enumerate() {
                let expect = w * (1.0 / wg.weighted_degree(u) + 1.0 / wg.weighted_degree(v));
                prop_assert!((c.values[e] - expect).abs() <= 1e-9 * expect.max(1.0));
                prop_assert!(c.values[e] > 0.0);
            }
        }

        #[test]
        fn power_of_two_scaling_is_exact((g, h) in arb_features(), p in -8i32..8, rho in 0.0f64..0.999) {
            let c = 2f64.powi(p);
            let w1 = reweight_edges(&g, &h).unwrap();
            let w2 = reweight_edges(&g, &h.scale(c)).unwrap();
            prop_assert_eq!(w1.edge_weights(), w2.edge_weights());
            prop_assert_eq!(sparsify(&w1, rho).unwrap().removed, sparsify(&w2, rho).unwrap().removed);
        }

        #[test]
        fn arbitrary_scaling_keeps_weights((g, h) in arb_features(), c in 1e-3f64..1e3) {
            let w1 = reweight_edges(&g, &h).unwrap();
            let w2 = reweight_edges(&g, &h.scale(c)).unwrap();
            for (a, b) in w1.edge_weights().iter().zip(w2.edge_weights()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
