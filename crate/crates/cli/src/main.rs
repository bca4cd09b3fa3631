mod verify;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use tada_core::expander::{head_accuracy, pretrain};
use tada_core::io::{load_attributes, load_edge_list, load_labels, load_weighted_edge_list, save_dense_binary, save_edge_list, save_labels};
use tada_core::pipeline::{bench_sketch, bench_sparsifier, eval_downstream, run_pipeline, write_json, PipelineConfig};
use tada_core::rng::seeded;
use tada_core::sbm::{erdos_renyi, generate_sbm, SbmParams};
use tada_core::sketch::sketch_graph;
use tada_core::sparsify::{reweight_edges, sparsify};
use tada_core::{classifier::standardize_columns, DenseMatrix, Graph, Split, TadaError};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "tada", version, about = "Sketch-based feature expansion and edge sparsification for dense graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the hybrid Count-Sketch/RWR-Sketch embedding `A′`.
    Sketch(SketchCmd),
    /// Pre-train the feature expander and emit `H⁽⁰⁾`.
    Pretrain(TrainCmd),
    /// Reweight edges by feature cosine and drop the least central ones.
    Sparsify(SparsifyCmd),
    /// Sketch, pre-train, reweight, sparsify and evaluate.
    Pipeline(TrainCmd),
    /// Test accuracy of a linear propagation model on a (weighted) graph.
    Eval(EvalCmd),
    /// Run the dense oracles and print a pass/fail table.
    Verify(VerifyCmd),
    /// Median timings of the sketch and sparsifier stages.
    Bench(BenchCmd),
    /// Write a stochastic block model graph with attributes and splits.
    GenSbm(GenSbmCmd),
}

/// Overrides for config keys; flag > `TADA_SEED` > `--config` file > default.
#[derive(Args)]
struct Knobs {
    /// `key=value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    walk_steps: Option<usize>,
    #[arg(long)]
    centroids: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    eval_epochs: Option<usize>,
    #[arg(long)]
    eval_lr: Option<f64>,
}

impl Knobs {
    fn resolve(&self) -> tada_core::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        cfg.apply_env()?;
        let flags = [
            ("k", self.k.map(|v| v.to_string())),
            ("h", self.h.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("beta", self.beta.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("walk_steps", self.walk_steps.map(|v| v.to_string())),
            ("centroids", self.centroids.map(|v| v.to_string())),
            ("rho", self.rho.map(|v| v.to_string())),
            ("pretrain_epochs", self.pretrain_epochs.map(|v| v.to_string())),
            ("lr", self.lr.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("layers", self.layers.map(|v| v.to_string())),
            ("eval_epochs", self.eval_epochs.map(|v| v.to_string())),
            ("eval_lr", self.eval_lr.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SketchCmd {
    /// Edge list, one `u v` pair per line.
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainCmd {
    #[arg(long)]
    graph: PathBuf,
    /// Attribute matrix, `TADA` binary or CSV.
    #[arg(long)]
    attributes: PathBuf,
    /// One integer class label per line.
    #[arg(long)]
    labels: PathBuf,
    /// One of train/val/test per line; every node trains without it.
    #[arg(long)]
    splits: Option<PathBuf>,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SparsifyCmd {
    #[arg(long)]
    graph: PathBuf,
    /// Node features used for cosine reweighting, usually `h0.tada`.
    #[arg(long)]
    features: PathBuf,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalCmd {
    /// Edge list with an optional weight column.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    splits: PathBuf,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyCmd {
    /// Graph to check (at most 200 nodes for the dense checks); a seeded
    /// random graph is used when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Mixing steps to check.
    #[arg(long, default_value_t = 20)]
    t_max: usize,
    /// Monte-Carlo trials for the estimator variance check.
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchCmd {
    /// Graph to time; an Erdős–Rényi graph is generated when omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    nodes: usize,
    #[arg(long, default_value_t = 20.0)]
    avg_degree: f64,
    /// Width of the random features used to time the sparsifier.
    #[arg(long, default_value_t = 32)]
    feature_dim: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[command(flatten)]
    knobs: Knobs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenSbmCmd {
    #[arg(long, default_value_t = 500)]
    nodes: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 0.16)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, default_value_t = 8)]
    attr_dim: usize,
    /// Standard deviation of the attribute noise.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

enum Failure {
    Error(TadaError),
    Verification,
}

impl From<TadaError> for Failure {
    fn from(e: TadaError) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn emit<S: Serialize>(report: &S, out_dir: Option<&Path>) -> tada_core::Result<()> {
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("report.json");
            write_json(report, &path)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let text = serde_json::to_string_pretty(report).map_err(|e| TadaError::Format(e.to_string()))?;
            print_stdout(&format!("{text}\n"))?;
        }
    }
    Ok(())
}

/// Writes to stdout; a closed pipe (`tada ... | head`) is not an error.
fn print_stdout(text: &str) -> std::io::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r,
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn load_graph(path: &Path) -> tada_core::Result<Graph> {
    Ok(load_edge_list(path)?.0)
}

fn check_rows(what: &'static str, m: &DenseMatrix<f64>, n: usize) -> tada_core::Result<()> {
    if m.rows() != n {
        return Err(TadaError::DimensionMismatch { what, expected: n, found: m.rows() });
    }
    Ok(())
}

fn cmd_sketch(c: &SketchCmd) -> CmdResult {
    let cfg = c.knobs.resolve()?;
    let g = load_graph(&c.graph)?;
    cfg.validate(g.node_count())?;
    let t = Instant::now();
    let (sketch, rwr) = sketch_graph::<f64>(&g, &cfg.sketch_config())?;
    let sketch_ms = ms(t);
    if let Some(dir) = &c.out_dir {
        fs::create_dir_all(dir)?;
        sketch.write(fs::File::create(dir.join("sketch.tada"))?, fs::File::create(dir.join("sketch.meta"))?)?;
    }
    let report = json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "shape": [sketch.values.rows(), sketch.values.cols()],
        "provenance": sketch.provenance,
        "unreachable_nodes": rwr.as_ref().map_or(0, |r| r.unreachable()),
        "sketch_ms": sketch_ms,
    });
    Ok(emit(&report, c.out_dir.as_deref())?)
}

fn load_training(c: &TrainCmd) -> tada_core::Result<(Graph, DenseMatrix<f64>, tada_core::LabelVector)> {
    let g = load_graph(&c.graph)?;
    let x = load_attributes::<f64>(&c.attributes)?;
    check_rows("attribute rows", &x, g.node_count())?;
    let y = load_labels(&c.labels, c.splits.as_deref())?;
    y.ensure_len(g.node_count())?;
    Ok((g, x, y))
}

fn cmd_pretrain(c: &TrainCmd) -> CmdResult {
    let cfg = c.knobs.resolve()?;
    let (g, x, y) = load_training(c)?;
    cfg.validate(g.node_count())?;
    let t = Instant::now();
    let (sketch, _) = sketch_graph::<f64>(&g, &cfg.sketch_config())?;
    let xs = standardize_columns(&x);
    let (params, features) = pretrain(&sketch.values, &xs, &y, &cfg.pretrain_config())?;
    let elapsed = ms(t);
    let train_accuracy = head_accuracy(&sketch.values, &xs, &y, Split::Train, &params)?;
    if let Some(dir) = &c.out_dir {
        fs::create_dir_all(dir)?;
        params.write(fs::File::create(dir.join("params.tada"))?, fs::File::create(dir.join("params.manifest"))?)?;
        save_dense_binary(&features.h0, dir.join("h0.tada"))?;
    }
    let report = json!({
        "nodes": g.node_count(),
        "h0_shape": [features.h0.rows(), features.h0.cols()],
        "loss_trace": features.loss_trace,
        "loss_monotone_fraction": features.monotone_fraction(),
        "train_accuracy": train_accuracy,
        "elapsed_ms": elapsed,
        "config": cfg,
    });
    Ok(emit(&report, c.out_dir.as_deref())?)
}

fn cmd_sparsify(c: &SparsifyCmd) -> CmdResult {
    let cfg = c.knobs.resolve()?;
    let g = load_graph(&c.graph)?;
    let h0 = load_attributes::<f64>(&c.features)?;
    check_rows("feature rows", &h0, g.node_count())?;
    let t = Instant::now();
    let sparsified = sparsify(&reweight_edges(&g, &h0)?, cfg.rho)?;
    let elapsed = ms(t);
    let stats = sparsified.stats();
    if let Some(dir) = &c.out_dir {
        fs::create_dir_all(dir)?;
        let mut w = std::io::BufWriter::new(fs::File::create(dir.join("sparsified.tsv"))?);
        sparsified.write_edges(&mut w)?;
        w.flush()?;
        write_json(&stats, dir.join("stats.json"))?;
    }
    let report = json!({
        "edges_before": g.edge_count(),
        "edges_after": sparsified.graph.base().edge_count(),
        "stats": stats,
        "elapsed_ms": elapsed,
    });
    Ok(emit(&report, c.out_dir.as_deref())?)
}

fn cmd_pipeline(c: &TrainCmd) -> CmdResult {
    let cfg = c.knobs.resolve()?;
    let (g, x, y) = load_training(c)?;
    let out = run_pipeline(&cfg, &g, &x, &y)?;
    match &c.out_dir {
        Some(dir) => {
            out.save(dir)?;
            eprintln!("wrote {}", dir.join("report.json").display());
        }
        None => emit(&out.report, None)?,
    }
    Ok(())
}

fn cmd_eval(c: &EvalCmd) -> CmdResult {
    let cfg = c.knobs.resolve()?;
    let g = load_weighted_edge_list::<f64>(&c.graph)?;
    let f = load_attributes::<f64>(&c.features)?;
    check_rows("feature rows", &f, g.base().node_count())?;
    let y = load_labels(&c.labels, Some(&c.splits))?;
    let t = Instant::now();
    let acc = eval_downstream(&g, &f, &y, cfg.layers, cfg.eval_epochs, cfg.eval_lr, cfg.seed)?;
    let report = json!({
        "nodes": g.base().node_count(),
        "edges": g.base().edge_count(),
        "layers": cfg.layers,
        "test_accuracy": acc,
        "elapsed_ms": ms(t),
    });
    Ok(emit(&report, c.out_dir.as_deref())?)
}

fn cmd_verify(c: &VerifyCmd) -> CmdResult {
    let cfg = c.knobs.resolve()?;
    let g = match &c.graph {
        Some(p) => load_weighted_edge_list::<f64>(p)?,
        None => tada_core::WeightedGraph::unit(erdos_renyi(40, 0.2, cfg.seed)?),
    };
    let checks = verify::run_checks(&g, &cfg, c.t_max, c.trials)?;
    print_stdout(&verify::table(&checks))?;
    if let Some(dir) = &c.out_dir {
        emit(&checks, Some(dir))?;
    }
    if checks.iter().any(|ch| ch.status == verify::Status::Fail) {
        return Err(Failure::Verification);
    }
    Ok(())
}

fn cmd_bench(c: &BenchCmd) -> CmdResult {
    let cfg = c.knobs.resolve()?;
    let g = match &c.graph {
        Some(p) => load_graph(p)?,
        None => {
            if c.nodes < 2 || c.avg_degree.is_nan() || c.avg_degree < 0.0 {
                return Err(TadaError::InvalidParameter("need nodes >= 2 and avg-degree >= 0".into()).into());
            }
            let p = (c.avg_degree / (c.nodes - 1) as f64).min(1.0);
            erdos_renyi(c.nodes, p, cfg.seed)?
        }
    };
    let sketch = bench_sketch(&g, cfg.k, c.reps, cfg.seed)?;
    let mut rng = seeded(cfg.seed, 0x6265_6e63);
    let h0 = DenseMatrix::from_fn(g.node_count(), c.feature_dim, |_, _| rng.gen_range(-1.0..1.0));
    let sparsifier_ms = bench_sparsifier(&g, &h0, cfg.rho, c.reps)?;
    let report = json!({
        "sketch": sketch,
        "sparsifier_ms": sparsifier_ms,
        "feature_dim": c.feature_dim,
        "rho": cfg.rho,
    });
    Ok(emit(&report, c.out_dir.as_deref())?)
}

fn cmd_gen_sbm(c: &GenSbmCmd) -> CmdResult {
    let mut cfg = PipelineConfig::default();
    cfg.apply_env()?;
    let seed = c.seed.unwrap_or(cfg.seed);
    let params = SbmParams {
        n: c.nodes,
        blocks: c.blocks,
        p_in: c.p_in,
        p_out: c.p_out,
        attr_dim: c.attr_dim,
        noise: c.noise,
        seed,
    };
    let sbm = generate_sbm(&params)?;
    let dir = &c.out_dir;
    fs::create_dir_all(dir)?;
    save_edge_list(&sbm.graph, dir.join("graph.tsv"))?;
    save_dense_binary(&sbm.attributes, dir.join("attributes.tada"))?;
    save_labels(&sbm.labels, dir.join("labels.txt"), dir.join("splits.txt"))?;
    let report = json!({
        "nodes": sbm.graph.node_count(),
        "edges": sbm.graph.edge_count(),
        "average_degree": 2.0 * sbm.graph.edge_count() as f64 / sbm.graph.node_count() as f64,
        "expected_degree": params.expected_degree(),
        "homophily": sbm.labels.homophily(sbm.graph.edges()),
        "seed": seed,
    });
    Ok(emit(&report, Some(dir))?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Sketch(c) => cmd_sketch(c),
        Command::Pretrain(c) => cmd_pretrain(c),
        Command::Sparsify(c) => cmd_sparsify(c),
        Command::Pipeline(c) => cmd_pipeline(c),
        Command::Eval(c) => cmd_eval(c),
        Command::Verify(c) => cmd_verify(c),
        Command::Bench(c) => cmd_bench(c),
        Command::GenSbm(c) => cmd_gen_sbm(c),
    };
    if let Err(f) = &result {
        match f {
            Failure::Verification => eprintln!("error: verification failed"),
            Failure::Error(e) => eprintln!("error: {e}"),
        }
    }
    ExitCode::from(exit_code(&result))
}

fn exit_code(result: &CmdResult) -> u8 {
    match result {
        Ok(()) => 0,
        Err(Failure::Verification) => EXIT_VERIFY,
        Err(Failure::Error(TadaError::InvalidParameter(_))) => EXIT_USAGE,
        Err(Failure::Error(_)) => EXIT_DATA,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Ok(())), 0);
        assert_eq!(exit_code(&Err(Failure::Verification)), 3);
        assert_eq!(exit_code(&Err(TadaError::InvalidParameter("x".into()).into())), 1);
        assert_eq!(exit_code(&Err(TadaError::EmptyGraph.into())), 2);
        assert_eq!(exit_code(&Err(TadaError::Parse { line: 1, msg: String::new() }.into())), 2);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "k = 8\nrho = 0.5\n").unwrap();
        let cli = Cli::try_parse_from(["tada", "sketch", "--graph", "g", "--config", path.to_str().unwrap(), "--k", "4"]).unwrap();
        let Command::Sketch(c) = cli.command else { panic!("wrong subcommand") };
        let cfg = c.knobs.resolve().unwrap();
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.rho, 0.5);
    }
}
