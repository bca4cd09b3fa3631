//! Sketched adjacency construction.
//!
//! Two `k × n` operators are applied to the adjacency matrix `A`:
//!
//! * the Count-Sketch `R = ΦΔ`, one random bucket and one random sign per node;
//! * the RWR-Sketch `S`, a row-normalized cluster indicator that assigns every
//!   node to the high-degree centroid with the largest truncated random-walk-
//!   with-restart score.
//!
//! Both operators have exactly one nonzero per column, so `A·Rᵀ` and `A·Sᵀ`
//! are accumulated in `O(m)` without ever materializing `R` or `S`.

use std::cmp::Ordering;
use std::io::Write;

use serde::Serialize;

use crate::error::{Result, TadaError};
use crate::graph::Graph;
use crate::io::{write_dense_binary, write_key_values};
use crate::matrix::{dot, DenseMatrix};
use crate::propagate::transition_multiply;
use crate::rng::CounterRng;
use crate::scalar::Scalar;

const HASH_STREAM: u64 = 0x4841_5348; // "HASH"
const SIGN_STREAM: u64 = 0x5349_474E; // "SIGN"
const PERM_STREAM: u64 = 0x5045_524D; // "PERM"

/// Count-Sketch operator `R = ΦΔ` stored as a bucket and a sign per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSketch {
    k: usize,
    hash: Vec<usize>,
    sign: Vec<i8>,
    seed: u64,
}

impl CountSketch {
    /// Draws `h(i)` uniformly from `[0, k)` and `s(i)` uniformly from `{±1}`,
    /// each a pure function of `(seed, i)`.
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        check_dims(n, k)?;
        let hash_rng = CounterRng::new(seed, HASH_STREAM);
        let sign_rng = CounterRng::new(seed, SIGN_STREAM);
        let hash = (0..n as u64).map(|i| hash_rng.below(i, k as u64) as usize).collect();
        let sign = (0..n as u64)
            .map(|i| if sign_rng.at(i) >> 63 == 0 { 1 } else { -1 })
            .collect();
        Ok(Self { k, hash, sign, seed })
    }

    /// Collision-free variant (`k ≥ n`): buckets are the first `n` entries of
    /// a seeded random permutation of `0..k`, so `ΦᵀΦ = I`.
    pub fn injective(n: usize, k: usize, seed: u64) -> Result<Self> {
        check_dims(n, k)?;
        if k < n {
            return Err(TadaError::invalid(format!(
                "injective count-sketch needs k >= n (k = {k}, n = {n})"
            )));
        }
        let perm_rng = CounterRng::new(seed, PERM_STREAM);
        let mut buckets: Vec<usize> = (0..k).collect();
        for i in 0..n {
            let j = i + perm_rng.below(i as u64, (k - i) as u64) as usize;
            buckets.swap(i, j);
        }
        buckets.truncate(n);
        let sign_rng = CounterRng::new(seed, SIGN_STREAM);
        let sign = (0..n as u64)
            .map(|i| if sign_rng.at(i) >> 63 == 0 { 1 } else { -1 })
            .collect();
        Ok(Self {
            k,
            hash: buckets,
            sign,
            seed,
        })
    }

    /// Explicit hash and sign arrays; signs must be ±1.
    pub fn from_parts(k: usize, hash: Vec<usize>, sign: Vec<i8>) -> Result<Self> {
        check_dims(hash.len(), k)?;
        if hash.len() != sign.len() {
            return Err(TadaError::DimensionMismatch {
                what: "count-sketch signs",
                expected: hash.len(),
                found: sign.len(),
            });
        }
        if let Some(&h) = hash.iter().find(|&&h| h >= k) {
            return Err(TadaError::invalid(format!("bucket {h} out of range for k = {k}")));
        }
        if sign.iter().any(|&s| s != 1 && s != -1) {
            return Err(TadaError::invalid("count-sketch signs must be +1 or -1"));
        }
        Ok(Self {
            k,
            hash,
            sign,
            seed: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.hash.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hash(&self) -> &[usize] {
        &self.hash
    }

    pub fn sign(&self) -> &[i8] {
        &self.sign
    }

    /// True when no two nodes share a bucket.
    pub fn is_injective(&self) -> bool {
        let mut used = vec![false; self.k];
        self.hash.iter().all(|&h| !std::mem::replace(&mut used[h], true))
    }

    /// `R·w` for a length-`n` vector.
    pub fn project<T: Scalar>(&self, w: &[T]) -> Result<Vec<T>> {
        if w.len() != self.n() {
            return Err(TadaError::DimensionMismatch {
                what: "count-sketch projection input",
                expected: self.n(),
                found: w.len(),
            });
        }
        let mut out = vec![T::zero(); self.k];
        for ((&h, &s), &x) in self.hash.iter().zip(&self.sign).zip(w) {
            out[h] += if s > 0 { x } else { -x };
        }
        Ok(out)
    }

    /// Dense `k × n` matrix `R`; for tests and oracles only.
    pub fn to_dense<T: Scalar>(&self) -> DenseMatrix<T> {
        let mut r = DenseMatrix::zeros(self.k, self.n());
        for (i, (&h, &s)) in self.hash.iter().zip(&self.sign).enumerate() {
            r[(h, i)] = T::of(f64::from(s));
        }
        r
    }
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(TadaError::invalid("sketch dimension k must be at least 1"));
    }
    if n == 0 {
        return Err(TadaError::invalid("sketch needs at least one node"));
    }
    Ok(())
}

fn check_sketch_n(g: &Graph, n: usize) -> Result<()> {
    if g.node_count() != n {
        return Err(TadaError::DimensionMismatch {
            what: "sketch node count",
            expected: g.node_count(),
            found: n,
        });
    }
    Ok(())
}

/// `A·Rᵀ` (`n × k`): for every node `i` and neighbor `j`,
/// `out[i][h(j)] += s(j)`.
pub fn apply_count_sketch<T: Scalar>(g: &Graph, cs: &CountSketch) -> Result<DenseMatrix<T>> {
    check_sketch_n(g, cs.n())?;
    let mut out = DenseMatrix::zeros(g.node_count(), cs.k);
    for i in 0..g.node_count() {
        let row = out.row_mut(i);
        for &j in g.neighbors(i) {
            let v = &mut row[cs.hash[j]];
            if cs.sign[j] > 0 {
                *v += T::one();
            } else {
                *v -= T::one();
            }
        }
    }
    Ok(out)
}

/// Parameters of the RWR-Sketch construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RwrParams {
    /// Number of final centroids (rows of `S`).
    pub k: usize,
    /// Size of the degree-ranked candidate pool `C`.
    pub candidates: usize,
    /// Power-iteration steps `T`.
    pub steps: usize,
    /// Decay factor `α ∈ (0, 1)`.
    pub alpha: f64,
}

impl RwrParams {
    fn validate(&self, n: usize) -> Result<()> {
        check_dims(n, self.k)?;
        if self.k > self.candidates {
            return Err(TadaError::invalid(format!(
                "k ({}) must not exceed the candidate pool size ({})",
                self.k, self.candidates
            )));
        }
        if self.candidates > n {
            return Err(TadaError::invalid(format!(
                "candidate pool size ({}) exceeds node count ({n})",
                self.candidates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(TadaError::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// RWR-Sketch operator `S` in assignment form.
///
/// `S[r][i] = 1 / row_norm[r]` if `assignment[i] == r`, else 0. Row `r`
/// corresponds to `centroids[r]`; centroids are ordered by descending score.
#[derive(Debug, Clone, PartialEq)]
pub struct RwrSketch {
    k: usize,
    assignment: Vec<usize>,
    row_norm: Vec<f64>,
    centroids: Vec<usize>,
    candidate_set_size: usize,
    /// Nodes whose RWR row was zero on every centroid (assigned to row 0).
    unreachable: usize,
}

impl RwrSketch {
    /// Builds `S` from an explicit assignment; row norms are `√(cluster size)`.
    pub fn from_assignment(k: usize, assignment: Vec<usize>, centroids: Vec<usize>) -> Result<Self> {
        check_dims(assignment.len(), k)?;
        if centroids.len() != k {
            return Err(TadaError::DimensionMismatch {
                what: "centroid list",
                expected: k,
                found: centroids.len(),
            });
        }
        let mut counts = vec![0usize; k];
        for &a in &assignment {
            if a >= k {
                return Err(TadaError::invalid(format!("assignment {a} out of range for k = {k}")));
            }
            counts[a] += 1;
        }
        Ok(Self {
            k,
            row_norm: counts.iter().map(|&c| (c as f64).sqrt()).collect(),
            assignment,
            centroids,
            candidate_set_size: k,
            unreachable: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn row_norm(&self) -> &[f64] {
        &self.row_norm
    }

    pub fn centroids(&self) -> &[usize] {
        &self.centroids
    }

    pub fn candidate_set_size(&self) -> usize {
        self.candidate_set_size
    }

    pub fn unreachable(&self) -> usize {
        self.unreachable
    }

    /// Dense `k × n` matrix `S`; for tests and oracles only.
    pub fn to_dense<T: Scalar>(&self) -> DenseMatrix<T> {
        let mut s = DenseMatrix::zeros(self.k, self.n());
        for (i, &r) in self.assignment.iter().enumerate() {
            s[(r, i)] = T::of(self.row_norm[r].recip());
        }
        s
    }
}

/// Top-`count` nodes by `key` descending, ties toward the smaller node id.
fn top_by<K: PartialOrd>(ids: &[usize], key: impl Fn(usize) -> K, count: usize) -> Vec<usize> {
    let mut ranked = ids.to_vec();
    ranked.sort_by(|&a, &b| {
        key(b)
            .partial_cmp(&key(a))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    ranked.truncate(count);
    ranked
}

/// The `count` highest-degree nodes, ties toward the smaller id.
pub fn degree_candidates(g: &Graph, count: usize) -> Vec<usize> {
    let ids: Vec<usize> = (0..g.node_count()).collect();
    top_by(&ids, |i| g.degree(i), count)
}

/// Truncated RWR scores `Π = Σ_{t=0}^{T} (1−α) αᵗ Pᵗ Π⁽⁰⁾` (`n × |sources|`),
/// where column `c` of `Π⁽⁰⁾` is the indicator of `sources[c]`.
///
/// Runs the recurrence `Π ← α·P·Π + (1−α)·Π⁽⁰⁾` `steps` times starting from
/// `(1−α)·Π⁽⁰⁾`.
pub fn rwr_scores<T: Scalar>(g: &Graph, sources: &[usize], alpha: T, steps: usize) -> Result<DenseMatrix<T>> {
    let n = g.node_count();
    let mut restart = DenseMatrix::zeros(n, sources.len());
    for (c, &s) in sources.iter().enumerate() {
        if s >= n {
            return Err(TadaError::NodeOutOfRange { id: s, n });
        }
        restart[(s, c)] = T::one() - alpha;
    }
    let mut pi = restart.clone();
    for _ in 0..steps {
        pi = transition_multiply(g, &pi)?.scale(alpha).add(&restart)?;
    }
    Ok(pi)
}

/// Builds the RWR-Sketch.
///
/// 1. `C` = top-`candidates` nodes by degree.
/// 2. `Π` = truncated RWR scores towards every candidate.
/// 3. Candidate score = column sum of `Π`; the top `k` form `C_k`.
/// 4. Each node joins the centroid of `C_k` with the largest `Π` entry; ties
///    (including all-zero rows) go to the lower centroid index.
/// 5. Row norms `√|cluster|` are recorded; empty rows keep norm 0.
pub fn build_rwr_sketch(g: &Graph, params: RwrParams) -> Result<RwrSketch> {
    let n = g.node_count();
    params.validate(n)?;
    let candidates = degree_candidates(g, params.candidates);
    let pi = rwr_scores::<f64>(g, &candidates, params.alpha, params.steps)?;
    let scores = pi.column_sums();

    let cols: Vec<usize> = (0..candidates.len()).collect();
    // Rank candidate columns by score, ties toward the smaller node id.
    let mut order = cols.clone();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(candidates[a].cmp(&candidates[b]))
    });
    order.truncate(params.k);
    let centroids: Vec<usize> = order.iter().map(|&c| candidates[c]).collect();

    let mut assignment = vec![0usize; n];
    let mut unreachable = 0;
    for (i, slot) in assignment.iter_mut().enumerate() {
        let row = pi.row(i);
        let mut best = 0usize;
        let mut best_val = row[order[0]];
        for (r, &c) in order.iter().enumerate().skip(1) {
            if row[c] > best_val {
                best = r;
                best_val = row[c];
            }
        }
        if best_val <= 0.0 {
            unreachable += 1;
        }
        *slot = best;
    }
    let mut sketch = RwrSketch::from_assignment(params.k, assignment, centroids)?;
    sketch.candidate_set_size = params.candidates;
    sketch.unreachable = unreachable;
    Ok(sketch)
}

/// `A·Sᵀ` (`n × k`): `out[i][r] = Σ_{j ∈ N(i), a(j) = r} 1 / row_norm(r)`.
pub fn apply_rwr_sketch<T: Scalar>(g: &Graph, rs: &RwrSketch) -> Result<DenseMatrix<T>> {
    check_sketch_n(g, rs.n())?;
    let inv: Vec<T> = rs
        .row_norm
        .iter()
        .map(|&r| if r > 0.0 { T::of(r.recip()) } else { T::zero() })
        .collect();
    let mut out = DenseMatrix::zeros(g.node_count(), rs.k);
    for i in 0..g.node_count() {
        let row = out.row_mut(i);
        for &j in g.neighbors(i) {
            let r = rs.assignment[j];
            row[r] += inv[r];
        }
    }
    Ok(out)
}

/// Everything needed to reproduce a sketched adjacency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SketchProvenance {
    pub k: usize,
    pub beta: f64,
    pub alpha: f64,
    pub steps: usize,
    pub candidates: usize,
    pub seed: u64,
}

/// `A′ = A·(Rᵀ + β·Sᵀ)`, an `n × k` dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchedAdjacency<T> {
    pub values: DenseMatrix<T>,
    pub provenance: SketchProvenance,
}

impl<T: Scalar> SketchedAdjacency<T> {
    pub fn k(&self) -> usize {
        self.provenance.k
    }

    pub fn beta(&self) -> f64 {
        self.provenance.beta
    }

    /// Writes the `TADA` matrix and the `key=value` sidecar.
    pub fn write<W1: Write, W2: Write>(&self, matrix: W1, sidecar: W2) -> Result<()> {
        write_dense_binary(&self.values, matrix)?;
        let p = &self.provenance;
        write_key_values(
            &[
                ("k", p.k.to_string()),
                ("beta", p.beta.to_string()),
                ("alpha", p.alpha.to_string()),
                ("T", p.steps.to_string()),
                ("c_size", p.candidates.to_string()),
                ("seed", p.seed.to_string()),
            ],
            sidecar,
        )
    }
}

/// Combines both sketches: `A′ = A·Rᵀ + β·A·Sᵀ`.
pub fn hybrid_sketch<T: Scalar>(
    g: &Graph,
    cs: &CountSketch,
    rs: &RwrSketch,
    beta: f64,
    provenance: SketchProvenance,
) -> Result<SketchedAdjacency<T>> {
    if cs.k != rs.k {
        return Err(TadaError::DimensionMismatch {
            what: "hybrid sketch k",
            expected: cs.k,
            found: rs.k,
        });
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(TadaError::invalid(format!("beta must be finite and >= 0, got {beta}")));
    }
    let mut values = apply_count_sketch(g, cs)?;
    if beta != 0.0 {
        let structural = apply_rwr_sketch::<T>(g, rs)?;
        values = values.axpy(T::of(beta), &structural)?;
    }
    Ok(SketchedAdjacency {
        values,
        provenance: SketchProvenance { beta, k: cs.k, ..provenance },
    })
}

/// Sketch settings used by [`sketch_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SketchConfig {
    pub k: usize,
    pub beta: f64,
    pub alpha: f64,
    pub steps: usize,
    /// Candidate pool size; `None` means `min(n, 4k)`.
    pub candidates: Option<usize>,
    pub seed: u64,
}

impl Default for SketchConfig {
    fn default() -> Self {
        Self {
            k: 128,
            beta: 1.0,
            alpha: 0.5,
            steps: 2,
            candidates: None,
            seed: 0,
        }
    }
}

impl SketchConfig {
    pub fn resolved_candidates(&self, n: usize) -> usize {
        self.candidates.unwrap_or_else(|| n.min(4 * self.k))
    }
}

/// Full hybrid pipeline: Count-Sketch, RWR-Sketch (skipped when `β = 0`), and
/// their combination.
pub fn sketch_graph<T: Scalar>(g: &Graph, cfg: &SketchConfig) -> Result<(SketchedAdjacency<T>, Option<RwrSketch>)> {
    let n = g.node_count();
    let candidates = cfg.resolved_candidates(n);
    let provenance = SketchProvenance {
        k: cfg.k,
        beta: cfg.beta,
        alpha: cfg.alpha,
        steps: cfg.steps,
        candidates,
        seed: cfg.seed,
    };
    let cs = CountSketch::new(n, cfg.k, cfg.seed)?;
    if cfg.beta == 0.0 {
        let values = apply_count_sketch(g, &cs)?;
        return Ok((SketchedAdjacency { values, provenance }, None));
    }
    let rs = build_rwr_sketch(
        g,
        RwrParams {
            k: cfg.k,
            candidates,
            steps: cfg.steps,
            alpha: cfg.alpha,
        },
    )?;
    let sk = hybrid_sketch(g, &cs, &rs, cfg.beta, provenance)?;
    Ok((sk, Some(rs)))
}

/// `A′_i · A′_j`, the common-neighbor estimate (`i = j` estimates the degree).
/// Only meaningful for a pure Count-Sketch (`β = 0`).
pub fn estimate_common_neighbors<T: Scalar>(a: &SketchedAdjacency<T>, i: usize, j: usize) -> Result<T> {
    if a.beta() != 0.0 {
        return Err(TadaError::invalid(
            "common-neighbor estimation requires a pure count-sketch (beta = 0)",
        ));
    }
    let n = a.values.rows();
    for id in [i, j] {
        if id >= n {
            return Err(TadaError::NodeOutOfRange { id, n });
        }
    }
    Ok(dot(a.values.row(i), a.values.row(j)))
}
