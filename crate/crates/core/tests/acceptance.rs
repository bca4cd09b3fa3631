//! Acceptance criteria. Prints one PASS/FAIL line per criterion; the lines
//! go straight to the stdout handle so they show up without `--nocapture`.

use std::io::Write;
use std::time::{Duration, Instant};

use tada_core::expander::{loss_and_gradients, ExpanderParams};
use tada_core::oracles::{check_er_bounds, check_mixing_bound, count_sketch_moments, residual_comparison};
use tada_core::pipeline::{bench_sketch, bench_sparsifier, run_pipeline, PipelineConfig};
use tada_core::rng::{seeded, CounterRng};
use tada_core::sbm::{erdos_renyi, generate_sbm, SbmParams};
use tada_core::sketch::{apply_count_sketch, rwr_scores, CountSketch};
use tada_core::sparsify::{edge_centralities, removal_count, sparsify};
use tada_core::{DenseMatrix, Graph, WeightedGraph};

use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed, 11);
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Connected, non-bipartite G(n, p) draws, scanning seeds from `start`.
fn good_graphs(count: usize, start: u64, mut shape: impl FnMut(u64) -> (usize, f64)) -> Vec<Graph> {
    let mut out = Vec::with_capacity(count);
    let mut seed = start;
    while out.len() < count {
        let (n, p) = shape(seed);
        let g = erdos_renyi(n, p, seed).unwrap();
        if g.is_connected() && !g.is_bipartite() {
            out.push(g);
        }
        seed += 1;
    }
    out
}

fn c1_count_sketch_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for gi in 0..20u64 {
        let n = 10 + (gi as usize * 7) % 50;
        let g = erdos_renyi(n, 0.2, 100 + gi).unwrap();
        let cs = CountSketch::injective(n, n + (gi as usize % 3) * 5, gi).unwrap();
        let ar = apply_count_sketch::<f64>(&g, &cs).unwrap();
        let a = g.to_dense::<f64>();
        for wi in 0..50u64 {
            let w = unit_vector(n, gi * 1000 + wi);
            let est = ar.matmul(&DenseMatrix::column(&cs.project(&w).unwrap())).unwrap();
            let exact = a.matmul(&DenseMatrix::column(&w)).unwrap();
            worst = worst.max(est.max_abs_diff(&exact).unwrap());
        }
    }
    outcome(worst <= 1e-6, format!("max abs error {worst:.3e} (limit 1e-6)"))
}

fn c2_estimator_statistics() -> Outcome {
    let g = erdos_renyi(20, 0.3, 2).unwrap();
    let w = unit_vector(20, 3);
    let m = count_sketch_moments(&g, &w, 16, 10_000, 0).unwrap();
    let max_z = m
        .rows
        .iter()
        .map(|r| if r.std_error > 0.0 { (r.mean - r.exact).abs() / r.std_error } else { 0.0 })
        .fold(0.0, f64::max);
    let max_ratio = m
        .rows
        .iter()
        .filter(|r| r.variance_bound > 0.0)
        .map(|r| r.variance / r.variance_bound)
        .fold(0.0, f64::max);
    let pass = m.mean_outliers(3.0) == 0 && m.variance_outliers(1.2) == 0;
    outcome(pass, format!("max |mean err|/SE {max_z:.2} (limit 3), max var/bound {max_ratio:.3} (limit 1.2)"))
}

fn c3_resistance_sandwich() -> Outcome {
    let graphs = good_graphs(100, 3000, |_| (30, 0.3));
    let mut violations = 0;
    let mut skipped = 0;
    let mut edges = 0;
    for (gi, g) in graphs.into_iter().enumerate() {
        let r = CounterRng::new(gi as u64, 5);
        let w = (0..g.edge_count()).map(|e| 0.1 + 0.9 * r.unit(e as u64)).collect();
        let rep = check_er_bounds(&WeightedGraph::new(g, w).unwrap()).unwrap();
        violations += rep.violations;
        edges += rep.edges.len();
        if !rep.asserted {
            skipped += 1;
        }
    }
    let tri = WeightedGraph::unit(Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap().0);
    let t = check_er_bounds(&tri).unwrap();
    let tight = t.edges.iter().all(|e| (e.exact - 2.0 / 3.0).abs() <= 1e-12 && (e.upper - e.exact).abs() <= 1e-12);
    outcome(
        violations == 0 && skipped == 0 && tight,
        format!("{violations} violations over {edges} edges, {skipped} unasserted graphs, triangle at upper bound: {tight}"),
    )
}

fn c4_mixing_bound() -> Outcome {
    let graphs = good_graphs(50, 5000, |s| {
        let n = 20 + (s as usize * 13) % 81;
        (n, (6.0 / n as f64).min(0.6))
    });
    let mut violations = 0;
    let mut worst = 0.0f64;
    for g in &graphs {
        let rep = check_mixing_bound(g, 20).unwrap();
        violations += rep.violations;
        worst = rep.steps.iter().skip(1).map(|s| s.max_transition_ratio).fold(worst, f64::max);
    }
    outcome(violations == 0, format!("{violations} violating steps, max deviation/bound {worst:.3}"))
}

fn c5_rwr_truncation() -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut failures = 0;
    for gi in 0..20u64 {
        let n = 15 + (gi as usize * 11) % 40;
        let g = erdos_renyi(n, 0.15, 7000 + gi).unwrap();
        let sources: Vec<usize> = (0..n).collect();
        for alpha in [0.3f64, 0.5, 0.85] {
            let inf = rwr_scores(&g, &sources, alpha, 200).unwrap();
            for t in [0usize, 1, 2, 5] {
                let dev = rwr_scores(&g, &sources, alpha, t).unwrap().max_abs_diff(&inf).unwrap();
                let bound = alpha.powi(t as i32 + 1);
                worst_ratio = worst_ratio.max(dev / bound);
                if dev > bound {
                    failures += 1;
                }
            }
        }
    }
    outcome(failures == 0, format!("{failures} failures, max deviation/bound {worst_ratio:.3}"))
}

fn c6_sparsifier_oracle() -> Outcome {
    let mut mismatches = 0;
    let mut count_errors = 0;
    let mut nest_failures = 0;
    for gi in 0..100u64 {
        let n = 5 + (gi as usize * 17) % 150;
        let g = erdos_renyi(n, (8.0 / n as f64).min(0.5), 9000 + gi).unwrap();
        if g.edge_count() == 0 {
            continue;
        }
        let r = CounterRng::new(gi, 9);
        // coarse weights force many centrality ties
        let w = (0..g.edge_count()).map(|e| (1 + r.below(e as u64, 4)) as f64 / 4.0).collect();
        let wg = WeightedGraph::new(g, w).unwrap();
        let m = wg.base().edge_count();
        let mut full: Vec<usize> = (0..m).collect();
        let c = edge_centralities(&wg).values;
        full.sort_by(|&a, &b| c[a].partial_cmp(&c[b]).unwrap().then(a.cmp(&b)));
        let mut prev: Option<Vec<usize>> = None;
        for rho in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
            let s = sparsify(&wg, rho).unwrap();
            let k = removal_count(m, rho);
            if s.removed.len() != k {
                count_errors += 1;
            }
            if s.removed != full[..k] {
                mismatches += 1;
            }
            if let Some(p) = &prev {
                if !p.iter().all(|e| s.removed.contains(e)) {
                    nest_failures += 1;
                }
            }
            prev = Some(s.removed);
        }
    }
    outcome(
        mismatches == 0 && count_errors == 0 && nest_failures == 0,
        format!("{mismatches} set mismatches, {count_errors} count errors, {nest_failures} nesting failures"),
    )
}

fn c7_gradient_check() -> Outcome {
    let mut rng = seeded(77, 0);
    let a = DenseMatrix::from_fn(6, 4, |_, _| rng.gen_range(-1.0..1.0));
    let x = DenseMatrix::from_fn(6, 3, |_, _| rng.gen_range(-1.0..1.0));
    let labels = [0, 1, 0, 1, 1, 0];
    let rows: Vec<usize> = (0..6).collect();
    let p = ExpanderParams::<f64>::init(4, 3, 5, 2, 0.5, 13).unwrap();
    let (_, g) = loss_and_gradients(&a, &x, &labels, &rows, &p).unwrap();
    let loss = |q: &ExpanderParams<f64>| loss_and_gradients(&a, &x, &labels, &rows, q).unwrap().0;
    let eps = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut probe = |analytic: f64, perturb: &dyn Fn(&mut ExpanderParams<f64>, f64)| {
        let mut hi = p.clone();
        perturb(&mut hi, eps);
        let mut lo = p.clone();
        perturb(&mut lo, -eps);
        let numeric = (loss(&hi) - loss(&lo)) / (2.0 * eps);
        let scale = analytic.abs().max(numeric.abs());
        let err = if scale > 1e-10 { (analytic - numeric).abs() / scale } else { 0.0 };
        worst = worst.max(err);
        checked += 1;
    };
    for i in 0..g.w_topo.as_slice().len() {
        probe(g.w_topo.as_slice()[i], &|q, d| q.w_topo.as_mut_slice()[i] += d);
    }
    for i in 0..g.w_attr.as_slice().len() {
        probe(g.w_attr.as_slice()[i], &|q, d| q.w_attr.as_mut_slice()[i] += d);
    }
    for i in 0..g.w_cls.as_slice().len() {
        probe(g.w_cls.as_slice()[i], &|q, d| q.w_cls.as_mut_slice()[i] += d);
    }
    for i in 0..g.b_cls.len() {
        probe(g.b_cls[i], &|q, d| q.b_cls[i] += d);
    }
    outcome(worst <= 1e-4, format!("{checked} partials, max relative error {worst:.3e} (limit 1e-4)"))
}

fn c8_residual_nesting() -> Outcome {
    let mut failures = 0;
    let mut strict = 0;
    for s in 0..50u64 {
        let mut rng = seeded(s, 8);
        let x = DenseMatrix::from_fn(60, 8, |_, _| rng.sample(StandardNormal));
        let a = erdos_renyi(60, 0.1, 8000 + s).unwrap().to_dense::<f64>();
        let c = DenseMatrix::from_fn(60, 4, |_, _| rng.sample(StandardNormal));
        let r = residual_comparison(&x, &a, &c).unwrap();
        if !r.nested() {
            failures += 1;
        }
        if r.res_xa < r.res_x {
            strict += 1;
        }
    }
    outcome(failures == 0, format!("{failures} failures, {strict}/50 strictly smaller with X‖A"))
}

fn c9_directional_gain() -> Outcome {
    let run = |noise: f64| {
        let (mut tada, mut base) = (0.0, 0.0);
        for seed in 0..5u64 {
            let sbm = generate_sbm(&SbmParams { n: 500, blocks: 2, p_in: 0.11, p_out: 0.05, attr_dim: 8, noise, seed })
                .unwrap();
            let cfg = PipelineConfig { seed, ..Default::default() };
            let acc = run_pipeline(&cfg, &sbm.graph, &sbm.attributes, &sbm.labels).unwrap().report.accuracy.unwrap();
            tada += acc.tada / 5.0;
            base += acc.baseline / 5.0;
        }
        (tada, base)
    };
    let (noisy_tada, noisy_base) = run(4.0);
    let (clean_tada, clean_base) = run(0.0);
    outcome(
        noisy_tada > noisy_base && clean_tada >= clean_base - 0.01,
        format!(
            "noisy: TADA {noisy_tada:.3} vs raw {noisy_base:.3}; clean: TADA {clean_tada:.3} vs raw {clean_base:.3}"
        ),
    )
}

fn c10_complexity() -> Outcome {
    let n = 20_000;
    let small = erdos_renyi(n, 5.0 / n as f64, 1).unwrap();
    let large = erdos_renyi(n, 50.0 / n as f64, 2).unwrap();
    let edge_ratio = large.edge_count() as f64 / small.edge_count() as f64;
    let cs_small = bench_sketch(&small, 128, 5, 0).unwrap().count_sketch_ms;
    let cs_large = bench_sketch(&large, 128, 5, 0).unwrap().count_sketch_ms;
    let mut rng = seeded(10, 0);
    let h0 = DenseMatrix::from_fn(n, 32, |_, _| rng.gen_range(-1.0..1.0));
    let sp_small = bench_sparsifier(&small, &h0, 0.3, 5).unwrap();
    let sp_large = bench_sparsifier(&large, &h0, 0.3, 5).unwrap();
    let (r1, r2) = (cs_large / cs_small, sp_large / sp_small);
    outcome(
        r1 <= 15.0 && r2 <= 15.0,
        format!("edges x{edge_ratio:.1}: count-sketch time x{r1:.2}, sparsifier time x{r2:.2} (limit 15)"),
    )
}

#[test]
fn acceptance() {
    type Criterion = (usize, &'static str, fn() -> Outcome, u64);
    let criteria: [Criterion; 10] = [
        (1, "count-sketch exactness", c1_count_sketch_exactness, 5),
        (2, "estimator statistics", c2_estimator_statistics, 60),
        (3, "resistance sandwich", c3_resistance_sandwich, 30),
        (4, "mixing bound", c4_mixing_bound, 60),
        (5, "RWR truncation", c5_rwr_truncation, 30),
        (6, "sparsifier oracle", c6_sparsifier_oracle, 10),
        (7, "gradient check", c7_gradient_check, 5),
        (8, "residual nesting", c8_residual_nesting, 10),
        (9, "directional gain", c9_directional_gain, 120),
        (10, "complexity smoke", c10_complexity, 120),
    ];
    let mut failed = Vec::new();
    let _ = writeln!(std::io::stdout());
    for (id, name, run, limit) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = out.pass && in_time;
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(
            stdout,
            "criterion {id:>2} {:<24} {} | {} | {:.2}s (limit {limit}s)",
            name,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
        let _ = stdout.flush();
        if !pass {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
