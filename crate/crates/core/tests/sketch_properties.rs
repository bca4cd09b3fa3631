use proptest::prelude::*;
use tada_core::oracles::{count_sketch_moments, dense_rwr, transition_matrix};
use tada_core::rng::{derive_seed, CounterRng};
use tada_core::sbm::erdos_renyi;
use tada_core::sketch::*;
use tada_core::{DenseMatrix, Graph};

fn unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let r = CounterRng::new(seed, 77);
    let v: Vec<f64> = (0..n).map(|i| r.unit(i as u64) - 0.5).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn count_only(g: &Graph, k: usize, seed: u64) -> SketchedAdjacency<f64> {
    let cfg = SketchConfig { k, beta: 0.0, seed, ..Default::default() };
    sketch_graph(g, &cfg).unwrap().0
}

#[test]
fn estimator_variance_within_bound() {
    let g = erdos_renyi(25, 0.25, 12).unwrap();
    let w = unit_vector(25, 1);
    let m = count_sketch_moments(&g, &w, 8, 10_000, 2024).unwrap();
    assert_eq!(m.variance_outliers(1.2), 0);
}

// A single "every row within 3 SE" check fails by chance a few percent of
// the time, so check that standardized errors have mean ≈ 0 and E[z²] ≈ 1.
#[test]
fn estimator_errors_are_calibrated() {
    let g = erdos_renyi(20, 0.3, 6).unwrap();
    let w = unit_vector(20, 2);
    let batches = 200;
    let mut z = [0.0; 20];
    let mut z2 = [0.0; 20];
    for b in 0..batches {
        let m = count_sketch_moments(&g, &w, 8, 1000, 5000 + b).unwrap();
        for (i, r) in m.rows.iter().enumerate() {
            let s = (r.mean - r.exact) / r.std_error;
            z[i] += s / batches as f64;
            z2[i] += s * s / batches as f64;
        }
    }
    for i in 0..20 {
        // standard error of mean z is 1/√200 ≈ 0.07, of mean z² about 0.1
        assert!(z[i].abs() <= 0.3, "row {i}: mean z {}", z[i]);
        assert!((0.6..=1.4).contains(&z2[i]), "row {i}: mean z² {}", z2[i]);
    }
}

#[test]
fn injective_gram_equals_squared_adjacency() {
    let g = erdos_renyi(40, 0.2, 5).unwrap();
    let a = g.to_dense::<f64>();
    let a2 = a.matmul(&a).unwrap();
    let cs = CountSketch::injective(40, 64, 9).unwrap();
    let ar = apply_count_sketch::<f64>(&g, &cs).unwrap();
    assert_eq!(ar.matmul_t(&ar).unwrap(), a2);
}

#[test]
fn gram_error_shrinks_as_k_doubles() {
    let g = erdos_renyi(50, 0.15, 31).unwrap();
    let a = g.to_dense::<f64>();
    let a2 = a.matmul(&a).unwrap();
    let mean_err = |k: usize| {
        (0..100u64)
            .map(|s| {
                let ar = count_only(&g, k, derive_seed(k as u64, s)).values;
                ar.matmul_t(&ar).unwrap().sub(&a2).unwrap().frobenius_norm()
            })
            .sum::<f64>()
            / 100.0
    };
    let errs: Vec<f64> = [8, 16, 32].iter().map(|&k| mean_err(k)).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn squared_norm_scaling_recovers_walk_meeting_probabilities() {
    let g = erdos_renyi(30, 0.25, 4).unwrap();
    assert_eq!(g.isolated_count(), 0);
    let cs = CountSketch::injective(30, 30, 3).unwrap();
    let ar = apply_count_sketch::<f64>(&g, &cs).unwrap();
    let scaled = DenseMatrix::from_fn(30, 30, |r, c| {
        let n2: f64 = ar.row(r).iter().map(|x| x * x).sum();
        ar[(r, c)] / n2
    });
    let p = transition_matrix(&g).unwrap();
    let lhs = scaled.matmul_t(&scaled).unwrap();
    let rhs = p.matmul_t(&p).unwrap();
    assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12);
}

#[test]
fn common_neighbor_estimates_are_unbiased() {
    let g = erdos_renyi(30, 0.3, 17).unwrap();
    let pairs = [(0, 1), (2, 9), (5, 5), (11, 29)];
    for (i, j) in pairs {
        let exact = g.neighbors(i).iter().filter(|x| g.neighbors(j).contains(x)).count() as f64;
        let samples: Vec<f64> = (0..200u64)
            .map(|s| estimate_common_neighbors(&count_only(&g, 256, s), i, j).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / 200.0;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 199.0;
        let se = (var / 200.0).sqrt();
        assert!((mean - exact).abs() <= 3.0 * se + 1e-12, "({i},{j}) mean {mean} exact {exact} se {se}");
    }
}

#[test]
fn barbell_centroids_split_sides() {
    let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap().0;
    let rs = build_rwr_sketch(&g, RwrParams { k: 2, candidates: 4, steps: 2, alpha: 0.5 }).unwrap();
    let mut cents = rs.centroids().to_vec();
    cents.sort();
    assert!(cents[0] <= 2 && cents[1] >= 3, "{cents:?}");
    let a = rs.assignment();
    let left = a[0];
    assert_eq!(a[1], left);
    assert_eq!(a[4], a[5]);
    assert_ne!(a[4], left);
    assert!(rs.centroids()[left] <= 2);

    // cross-check the assignment against the dense series
    let pi = dense_rwr(&g, rs.centroids(), 0.5, 2).unwrap();
    for i in 0..6 {
        let row = pi.row(i);
        let best = (0..2).fold(0, |b, c| if row[c] > row[b] { c } else { b });
        assert_eq!(a[i], best);
    }
}

fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2usize..max_n).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..(3 * n)).prop_map(move |es| Graph::from_edges(n, es).unwrap().0)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn injective_sketch_is_exact(g in arb_graph(40), extra in 0usize..20, seed in any::<u64>()) {
        let n = g.node_count();
        let cs = CountSketch::injective(n, n + extra, seed).unwrap();
        let ar = apply_count_sketch::<f64>(&g, &cs).unwrap();
        let w = unit_vector(n, seed);
        let est = ar.matmul(&DenseMatrix::column(&cs.project(&w).unwrap())).unwrap();
        let exact = g.to_dense::<f64>().matmul(&DenseMatrix::column(&w)).unwrap();
        prop_assert!(est.max_abs_diff(&exact).unwrap() <= 1e-12);
    }

    #[test]
    fn count_sketch_matches_dense_product(g in arb_graph(40), k in 1usize..20, seed in any::<u64>()) {
        let cs = CountSketch::new(g.node_count(), k, seed).unwrap();
        let dense = g.to_dense::<f64>().matmul_t(&cs.to_dense()).unwrap();
        prop_assert_eq!(apply_count_sketch::<f64>(&g, &cs).unwrap(), dense);
    }

    #[test]
    fn rwr_tail_bound(g in arb_graph(30), steps in 0usize..6, alpha in 0.05f64..0.95) {
        let sources: Vec<usize> = (0..g.node_count().min(4)).collect();
        let short = rwr_scores(&g, &sources, alpha, steps).unwrap();
        let long = rwr_scores(&g, &sources, alpha, 200).unwrap();
        prop_assert!(short.max_abs_diff(&long).unwrap() <= alpha.powi(steps as i32 + 1) + 1e-12);
    }

    #[test]
    fn rwr_sketch_structure(g in arb_graph(40), k in 1usize..6, steps in 0usize..4) {
        let n = g.node_count();
        prop_assume!(k <= n);
        let rs = build_rwr_sketch(&g, RwrParams { k, candidates: n.min(4 * k), steps, alpha: 0.5 }).unwrap();
        let s = rs.to_dense::<f64>();
        for c in 0..n {
            prop_assert_eq!(s.col_to_vec(c).iter().filter(|&&v| v != 0.0).count(), 1);
        }
        for r in 0..k {
            let norm: f64 = s.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sketches_are_deterministic(g in arb_graph(40), seed in any::<u64>()) {
        let cfg = SketchConfig { k: 2.min(g.node_count()), seed, ..Default::default() };
        let (a, ra) = sketch_graph::<f64>(&g, &cfg).unwrap();
        let (b, rb) = sketch_graph::<f64>(&g, &cfg).unwrap();
        prop_assert_eq!(a.values, b.values);
        prop_assert_eq!(ra, rb);
    }
}
