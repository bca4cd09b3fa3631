//! End-to-end orchestration: sketch, pre-train, reweight, sparsify, plus a
//! linear propagation evaluator and timing helpers.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::classifier::{accuracy, standardize_columns, SoftmaxRegression};
use crate::error::{Result, TadaError};
use crate::expander::{pretrain, ExpanderParams, InitialFeatures, PretrainConfig};
use crate::graph::{Adjacency, Graph};
use crate::io::save_dense_binary;
use crate::labels::{LabelVector, Split};
use crate::matrix::DenseMatrix;
use crate::propagate::norm_adj_power_multiply;
use crate::sketch::{apply_count_sketch, build_rwr_sketch, sketch_graph, CountSketch, RwrParams, SketchConfig, SketchedAdjacency};
use crate::sparsify::{reweight_edges, sparsify, SparsifiedGraph, SparsifyStats};

pub const SEED_ENV: &str = "TADA_SEED";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub k: usize,
    pub h: usize,
    pub gamma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub walk_steps: usize,
    /// `None` resolves to `min(n, 4k)`.
    pub centroids: Option<usize>,
    pub rho: f64,
    pub pretrain_epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub layers: usize,
    pub eval_epochs: usize,
    pub eval_lr: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 128,
            h: 128,
            gamma: 0.5,
            beta: 1.0,
            alpha: 0.5,
            walk_steps: 2,
            centroids: None,
            rho: 0.3,
            pretrain_epochs: 128,
            lr: 0.05,
            seed: 0,
            layers: 2,
            eval_epochs: 200,
            eval_lr: 0.2,
        }
    }
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| TadaError::invalid(format!("cannot parse {key} = {value:?}")))
}

impl PipelineConfig {
    /// Sets one key. Keys match the CLI flag names with `_` or `-`; a few
    /// short aliases (`T`, `c_size`, `n_p`, `L`) are accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim().replace('-', "_").as_str() {
            "k" => self.k = parse(key, value)?,
            "h" => self.h = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "walk_steps" | "T" => self.walk_steps = parse(key, value)?,
            "centroids" | "c_size" => self.centroids = Some(parse(key, value)?),
            "rho" => self.rho = parse(key, value)?,
            "pretrain_epochs" | "n_p" => self.pretrain_epochs = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "layers" | "L" => self.layers = parse(key, value)?,
            "eval_epochs" => self.eval_epochs = parse(key, value)?,
            "eval_lr" => self.eval_lr = parse(key, value)?,
            other => return Err(TadaError::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn from_key_values(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in kv {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::io::BufReader::new(File::open(path)?);
        Self::from_key_values(&crate::io::read_key_values(file)?)
    }

    /// Applies `TADA_SEED` if set; call before CLI overrides so flags win.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse(SEED_ENV, &v)?;
        }
        Ok(())
    }

    pub fn resolved_centroids(&self, n: usize) -> usize {
        self.centroids.unwrap_or_else(|| n.min(4 * self.k))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.h == 0 {
            return Err(TadaError::invalid("k and h must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(TadaError::invalid(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(TadaError::invalid(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(TadaError::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(TadaError::invalid("beta must be a nonnegative number"));
        }
        let c = self.resolved_centroids(n);
        if self.beta > 0.0 && (self.k > c || c > n) {
            return Err(TadaError::invalid(format!(
                "need k <= centroids <= n, got k = {}, centroids = {c}, n = {n}",
                self.k
            )));
        }
        Ok(())
    }

    pub fn sketch_config(&self) -> SketchConfig {
        SketchConfig {
            k: self.k,
            beta: self.beta,
            alpha: self.alpha,
            steps: self.walk_steps,
            candidates: self.centroids,
            seed: self.seed,
        }
    }

    pub fn pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            hidden: self.h,
            gamma: self.gamma,
            epochs: self.pretrain_epochs,
            lr: self.lr,
            seed: self.seed,
        }
    }

    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("k", self.k.to_string()),
            ("h", self.h.to_string()),
            ("gamma", self.gamma.to_string()),
            ("beta", self.beta.to_string()),
            ("alpha", self.alpha.to_string()),
            ("walk_steps", self.walk_steps.to_string()),
        ];
        if let Some(c) = self.centroids {
            out.push(("centroids", c.to_string()));
        }
        out.extend([
            ("rho", self.rho.to_string()),
            ("pretrain_epochs", self.pretrain_epochs.to_string()),
            ("lr", self.lr.to_string()),
            ("seed", self.seed.to_string()),
            ("layers", self.layers.to_string()),
            ("eval_epochs", self.eval_epochs.to_string()),
            ("eval_lr", self.eval_lr.to_string()),
        ]);
        out
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StageTimings {
    pub sketch_ms: f64,
    pub pretrain_ms: f64,
    pub reweight_ms: f64,
    pub sparsify_ms: f64,
    pub evaluate_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Accuracies {
    pub tada: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub nodes: usize,
    pub timings: StageTimings,
    pub edges_before: usize,
    pub edges_after: usize,
    pub isolated_nodes: usize,
    pub unreachable_nodes: usize,
    pub loss_trace: Vec<f64>,
    pub loss_monotone_fraction: f64,
    pub sparsify: SparsifyStats,
    pub accuracy: Option<Accuracies>,
    pub config: PipelineConfig,
}

pub struct PipelineOutput {
    pub sketch: SketchedAdjacency<f64>,
    pub params: ExpanderParams<f64>,
    pub features: InitialFeatures<f64>,
    pub sparsified: SparsifiedGraph<f64>,
    pub report: RunReport,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Sketch → pretrain → reweight → sparsify. When the labels carry a nonempty
/// test split, both the TADA output and the raw input are also evaluated.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    g: &Graph,
    x: &DenseMatrix<f64>,
    y: &LabelVector,
) -> Result<PipelineOutput> {
    let n = g.node_count();
    cfg.validate(n)?;
    y.ensure_len(n)?;
    if x.rows() != n {
        return Err(TadaError::DimensionMismatch { what: "attribute rows", expected: n, found: x.rows() });
    }
    let total = Instant::now();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let (sketch, rwr) = sketch_graph::<f64>(g, &cfg.sketch_config())?;
    timings.sketch_ms = ms(t);

    let t = Instant::now();
    let xs = standardize_columns(x);
    let (params, features) = pretrain(&sketch.values, &xs, y, &cfg.pretrain_config())?;
    timings.pretrain_ms = ms(t);

    let t = Instant::now();
    let wg = reweight_edges(g, &features.h0)?;
    timings.reweight_ms = ms(t);

    let t = Instant::now();
    let sparsified = sparsify(&wg, cfg.rho)?;
    timings.sparsify_ms = ms(t);

    let t = Instant::now();
    let accuracy = if y.indices(Split::Test).is_empty() {
        None
    } else {
        let tada =
            eval_downstream(&sparsified.graph, &features.h0, y, cfg.layers, cfg.eval_epochs, cfg.eval_lr, cfg.seed)?;
        let baseline = eval_downstream(g, x, y, cfg.layers, cfg.eval_epochs, cfg.eval_lr, cfg.seed)?;
        Some(Accuracies { tada, baseline })
    };
    timings.evaluate_ms = ms(t);
    timings.total_ms = ms(total);

    let stats = sparsified.stats();
    let report = RunReport {
        nodes: n,
        timings,
        edges_before: g.edge_count(),
        edges_after: sparsified.graph.base().edge_count(),
        isolated_nodes: stats.isolated_nodes,
        unreachable_nodes: rwr.as_ref().map_or(0, |r| r.unreachable()),
        loss_trace: features.loss_trace.clone(),
        loss_monotone_fraction: features.monotone_fraction(),
        sparsify: stats,
        accuracy,
        config: cfg.clone(),
    };
    Ok(PipelineOutput { sketch, params, features, sparsified, report })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

impl PipelineOutput {
    /// Writes every artifact and `report.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.sketch.write(create(dir, "sketch.tada")?, create(dir, "sketch.meta")?)?;
        self.params.write(create(dir, "params.tada")?, create(dir, "params.manifest")?)?;
        save_dense_binary(&self.features.h0, dir.join("h0.tada"))?;
        let mut edges = create(dir, "sparsified.tsv")?;
        self.sparsified.write_edges(&mut edges)?;
        edges.flush()?;
        write_json(&self.sparsified.stats(), dir.join("stats.json"))?;
        write_json(&self.report, dir.join("report.json"))
    }
}

pub fn write_json<S: Serialize>(value: &S, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| TadaError::Format(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Test accuracy of `softmax(std(Ã^L F) W + b)` trained on the train split.
///
/// `Ã` uses weighted degrees when `g` is weighted. Propagated features are
/// standardized per column before the regression.
pub fn eval_downstream<G: Adjacency<f64>>(
    g: &G,
    f: &DenseMatrix<f64>,
    y: &LabelVector,
    layers: usize,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<f64> {
    y.ensure_len(g.node_count())?;
    let test = y.indices(Split::Test);
    if test.is_empty() {
        return Err(TadaError::EmptySplit("test"));
    }
    let train = y.indices(Split::Train);
    let z = standardize_columns(&norm_adj_power_multiply(g, f, layers)?);
    let mut rng = crate::rng::seeded(seed, 0x6576_616c);
    let mut clf = SoftmaxRegression::init(z.cols(), y.num_classes(), &mut rng);
    clf.fit(&z, y, &train, epochs, lr)?;
    Ok(accuracy(&clf.predict(&z)?, y.labels(), &test))
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub nodes: usize,
    pub edges: usize,
    pub k: usize,
    pub reps: usize,
    pub count_sketch_ms: f64,
    pub rwr_sketch_ms: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Median wall time of `f` over `reps` runs.
pub fn time_median(reps: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        f()?;
        times.push(ms(t));
    }
    Ok(median(times))
}

/// Median times of `A·Rᵀ` and of building the RWR-Sketch.
pub fn bench_sketch(g: &Graph, k: usize, reps: usize, seed: u64) -> Result<BenchReport> {
    if reps < 3 {
        return Err(TadaError::invalid("bench needs at least 3 repetitions"));
    }
    let n = g.node_count();
    let cs = CountSketch::new(n, k, seed)?;
    let count_sketch_ms = time_median(reps, || apply_count_sketch::<f64>(g, &cs).map(drop))?;
    let params = RwrParams { k: k.min(n), candidates: n.min(4 * k), steps: 2, alpha: 0.5 };
    let rwr_sketch_ms = time_median(reps, || build_rwr_sketch(g, params).map(drop))?;
    Ok(BenchReport { nodes: n, edges: g.edge_count(), k, reps, count_sketch_ms, rwr_sketch_ms })
}

/// Median time of reweighting plus sparsification for fixed `H⁽⁰⁾`.
pub fn bench_sparsifier(g: &Graph, h0: &DenseMatrix<f64>, rho: f64, reps: usize) -> Result<f64> {
    if reps < 3 {
        return Err(TadaError::invalid("bench needs at least 3 repetitions"));
    }
    time_median(reps, || sparsify(&reweight_edges(g, h0)?, rho).map(drop))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expander::forward_initial_features;
    use crate::sbm::{generate_sbm, SbmParams};
    use crate::sparsify::clamped_cosine;

    fn small_sbm(noise: f64, seed: u64) -> crate::sbm::Sbm {
        generate_sbm(&SbmParams { n: 120, blocks: 2, p_in: 0.3, p_out: 0.02, attr_dim: 4, noise, seed }).unwrap()
    }

    fn small_cfg() -> PipelineConfig {
        PipelineConfig { k: 16, h: 16, pretrain_epochs: 20, eval_epochs: 50, ..Default::default() }
    }

    #[test]
    fn config_keys_and_aliases() {
        let mut cfg = PipelineConfig::default();
        cfg.set("walk-steps", "3").unwrap();
        cfg.set("c_size", "40").unwrap();
        cfg.set("n_p", "7").unwrap();
        cfg.set("L", "1").unwrap();
        assert_eq!((cfg.walk_steps, cfg.centroids, cfg.pretrain_epochs, cfg.layers), (3, Some(40), 7, 1));
        assert!(cfg.set("bogus", "1").is_err());
        assert!(cfg.set("k", "x").is_err());
        let kv: BTreeMap<_, _> = cfg.to_key_values().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        assert_eq!(PipelineConfig::from_key_values(&kv).unwrap(), cfg);
    }

    #[test]
    fn config_validation() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.validate(1000).is_ok());
        assert!(cfg.validate(100).is_err());
        cfg.k = 16;
        cfg.rho = 1.0;
        assert!(cfg.validate(100).is_err());
        cfg.rho = 0.2;
        cfg.alpha = 1.0;
        assert!(cfg.validate(100).is_err());
    }

    #[test]
    fn pass_through_extremes() {
        let sbm = small_sbm(0.5, 1);
        let cfg = PipelineConfig { rho: 0.0, gamma: 0.0, pretrain_epochs: 0, ..small_cfg() };
        let out = run_pipeline(&cfg, &sbm.graph, &sbm.attributes, &sbm.labels).unwrap();
        assert_eq!(out.sparsified.graph.base(), &sbm.graph);
        let init = ExpanderParams::<f64>::init(16, 4, 16, 2, 0.0, cfg.seed).unwrap();
        let h = forward_initial_features(&out.sketch.values, &standardize_columns(&sbm.attributes), &init)
            .unwrap()
            .h0;
        for (u, v, w) in out.sparsified.graph.weighted_edges() {
            assert_eq!(w, clamped_cosine(h.row(u), h.row(v)));
        }
    }

    #[test]
    fn removal_count_and_report() {
        let sbm = small_sbm(1.0, 2);
        let out = run_pipeline(&small_cfg(), &sbm.graph, &sbm.attributes, &sbm.labels).unwrap();
        let m = sbm.graph.edge_count();
        assert_eq!(out.report.edges_before - out.report.edges_after, (m as f64 * 0.3).floor() as usize);
        assert_eq!(out.report.loss_trace.len(), 20);
        assert!(out.report.accuracy.is_some());
        let t = &out.report.timings;
        for v in [t.sketch_ms, t.pretrain_ms, t.reweight_ms, t.sparsify_ms, t.evaluate_ms, t.total_ms] {
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn deterministic_artifacts() {
        let sbm = small_sbm(1.0, 3);
        let dir = tempfile::tempdir().unwrap();
        for run in ["a", "b"] {
            run_pipeline(&small_cfg(), &sbm.graph, &sbm.attributes, &sbm.labels)
                .unwrap()
                .save(&dir.path().join(run))
                .unwrap();
        }
        for f in ["sketch.tada", "sketch.meta", "params.tada", "params.manifest", "h0.tada", "sparsified.tsv", "stats.json"] {
            let a = fs::read(dir.path().join("a").join(f)).unwrap();
            let b = fs::read(dir.path().join("b").join(f)).unwrap();
            assert_eq!(a, b, "{f} differs");
        }
        assert!(dir.path().join("a/report.json").exists());
    }

    #[test]
    fn evaluator_examples() {
        let sbm = small_sbm(0.0, 4);
        let acc = eval_downstream(&sbm.graph, &sbm.attributes, &sbm.labels, 0, 100, 0.2, 0).unwrap();
        assert_eq!(acc, 1.0);
        let acc = eval_downstream(&sbm.graph, &sbm.attributes, &sbm.labels, 2, 100, 0.2, 0).unwrap();
        assert!(acc >= 0.97);
        let y = LabelVector::all_train(sbm.labels.labels().to_vec()).unwrap();
        assert!(matches!(
            eval_downstream(&sbm.graph, &sbm.attributes, &y, 1, 10, 0.2, 0),
            Err(TadaError::EmptySplit("test"))
        ));
    }

    #[test]
    fn bench_runs() {
        let g = crate::sbm::erdos_renyi(200, 0.05, 1).unwrap();
        let r = bench_sketch(&g, 16, 3, 0).unwrap();
        assert!(r.count_sketch_ms >= 0.0 && r.rwr_sketch_ms >= 0.0);
        assert!(bench_sketch(&g, 16, 2, 0).is_err());
        let empty = Graph::empty(50);
        assert!(bench_sketch(&empty, 8, 3, 0).is_ok());
    }
}
