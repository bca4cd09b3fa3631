//! Dense brute-force references for small graphs.
//!
//! Everything here is `O(n³)` or worse and refuses inputs above
//! [`ORACLE_CAP`] nodes.

use serde::Serialize;

use crate::error::{Result, TadaError};
use crate::graph::{Adjacency, Graph, WeightedGraph};
use crate::matrix::DenseMatrix;
use crate::propagate::{norm_adj_multiply, transition_multiply};
use crate::rng::derive_seed;
use crate::sketch::{apply_count_sketch, CountSketch};

pub const ORACLE_CAP: usize = 500;
const MAX_SWEEPS: usize = 100;

fn cap(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(TadaError::TooLarge { n, cap: limit });
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: DenseMatrix<f64>,
    pub sweeps: usize,
}

impl Eigen {
    /// `U Λ Uᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix<f64> {
        let n = self.values.len();
        let scaled = DenseMatrix::from_fn(n, n, |r, c| self.vectors[(r, c)] * self.values[c]);
        scaled.matmul_t(&self.vectors).expect("square")
    }
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// `1e-10 · max(1, ‖M‖_F)`.
pub fn dense_eigs(m: &DenseMatrix<f64>) -> Result<Eigen> {
    let n = m.rows();
    if m.cols() != n {
        return Err(TadaError::DimensionMismatch { what: "square matrix", expected: n, found: m.cols() });
    }
    cap(n, ORACLE_CAP)?;
    m.ensure_finite("eigen input")?;
    if !m.is_symmetric(1e-10) {
        return Err(TadaError::invalid("matrix is not symmetric"));
    }
    let mut a = m.clone();
    let mut v = DenseMatrix::<f64>::identity(n);
    let tol = 1e-10 * m.frobenius_norm().max(1.0);
    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off < tol {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(TadaError::NotConverged(MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = (t * t + 1.0).sqrt().recip();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(Eigen { values, vectors, sweeps })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    /// Eigenvalues of the normalized adjacency, descending.
    pub eigenvalues: Vec<f64>,
    /// `1 − max(|σ₂|, |σ_n|)`.
    pub gap: f64,
    /// Second-largest eigenvalue.
    pub lambda2: f64,
}

pub fn normalized_adjacency<G: Adjacency<f64>>(g: &G) -> Result<DenseMatrix<f64>> {
    norm_adj_multiply(g, &DenseMatrix::identity(g.node_count()))
}

pub fn transition_matrix<G: Adjacency<f64>>(g: &G) -> Result<DenseMatrix<f64>> {
    transition_multiply(g, &DenseMatrix::identity(g.node_count()))
}

pub fn spectral_summary<G: Adjacency<f64>>(g: &G) -> Result<SpectralSummary> {
    cap(g.node_count(), ORACLE_CAP)?;
    let eig = dense_eigs(&normalized_adjacency(g)?)?;
    let vals = eig.values;
    let (lambda2, gap) = if vals.len() < 2 {
        (0.0, 1.0)
    } else {
        let s2 = vals[1];
        let sn = vals[vals.len() - 1];
        (s2, 1.0 - s2.abs().max(sn.abs()))
    };
    Ok(SpectralSummary { eigenvalues: vals, gap, lambda2 })
}

/// `L = D_w − W`.
pub fn laplacian(wg: &WeightedGraph<f64>) -> DenseMatrix<f64> {
    let mut l = wg.to_dense().scale(-1.0);
    for i in 0..wg.base().node_count() {
        l[(i, i)] = wg.weighted_degree(i);
    }
    l
}

/// `L⁺` by eigen-decomposition, dropping eigenvalues below `1e-9 · λ_max`.
pub fn laplacian_pinv(wg: &WeightedGraph<f64>) -> Result<DenseMatrix<f64>> {
    let n = wg.base().node_count();
    cap(n, ORACLE_CAP)?;
    if !wg.base().is_connected() {
        return Err(TadaError::Disconnected);
    }
    let eig = dense_eigs(&laplacian(wg))?;
    let thr = 1e-9 * eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let mut pinv = DenseMatrix::zeros(n, n);
    for (c, &lam) in eig.values.iter().enumerate() {
        if lam <= thr {
            continue;
        }
        let u = eig.vectors.col_to_vec(c);
        for i in 0..n {
            let ui = u[i] / lam;
            for j in 0..n {
                pinv[(i, j)] += ui * u[j];
            }
        }
    }
    Ok(pinv)
}

fn resistance(pinv: &DenseMatrix<f64>, i: usize, j: usize) -> f64 {
    pinv[(i, i)] + pinv[(j, j)] - 2.0 * pinv[(i, j)]
}

/// `L⁺_ii + L⁺_jj − 2 L⁺_ij`.
pub fn exact_effective_resistance(wg: &WeightedGraph<f64>, i: usize, j: usize) -> Result<f64> {
    let n = wg.base().node_count();
    for id in [i, j] {
        if id >= n {
            return Err(TadaError::NodeOutOfRange { id, n });
        }
    }
    Ok(resistance(&laplacian_pinv(wg)?, i, j))
}

#[derive(Debug, Clone, Serialize)]
pub struct ErEdgeBound {
    pub u: usize,
    pub v: usize,
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErBoundReport {
    pub lambda2: f64,
    pub edges: Vec<ErEdgeBound>,
    pub violations: usize,
    /// False when the graph is bipartite or `1 − λ₂ < 1e-6`; bounds are then
    /// reported but not counted as violations.
    pub asserted: bool,
    pub bipartite: bool,
    /// `exact / upper` over all edges: (min, mean, max).
    pub tightness: (f64, f64, f64),
}

/// `½(1/d_i + 1/d_j) ≤ r(i,j) ≤ (1/(1 − λ₂))(1/d_i + 1/d_j)` on every edge.
pub fn check_er_bounds(wg: &WeightedGraph<f64>) -> Result<ErBoundReport> {
    cap(wg.base().node_count(), 200)?;
    let pinv = laplacian_pinv(wg)?;
    let spectrum = spectral_summary(wg)?;
    let bipartite = wg.base().is_bipartite();
    let asserted = !bipartite && 1.0 - spectrum.lambda2 >= 1e-6;
    let d = wg.weighted_degrees();
    let mut edges = Vec::with_capacity(wg.base().edge_count());
    let mut violations = 0;
    let (mut tmin, mut tsum, mut tmax) = (f64::INFINITY, 0.0, f64::NEG_INFINITY);
    for (u, v, _) in wg.weighted_edges() {
        let s = d[u].recip() + d[v].recip();
        let b = ErEdgeBound { u, v, lower: 0.5 * s, exact: resistance(&pinv, u, v), upper: s / (1.0 - spectrum.lambda2) };
        if asserted && (b.exact < b.lower - 1e-9 || b.exact > b.upper + 1e-9) {
            violations += 1;
        }
        let ratio = b.exact / b.upper;
        tmin = tmin.min(ratio);
        tmax = tmax.max(ratio);
        tsum += ratio;
        edges.push(b);
    }
    let mean = if edges.is_empty() { 0.0 } else { tsum / edges.len() as f64 };
    Ok(ErBoundReport { lambda2: spectrum.lambda2, edges, violations, asserted, bipartite, tightness: (tmin, mean, tmax) })
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingStep {
    pub t: usize,
    /// `(1 − λ)ᵗ`.
    pub envelope: f64,
    pub max_transition_dev: f64,
    /// Largest `|Pᵗ_ij − d_j/2m| / (√(d_j/d_i)(1 − λ)ᵗ)`.
    pub max_transition_ratio: f64,
    pub max_normalized_dev: f64,
    pub asserted: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MixingReport {
    pub gap: f64,
    pub steps: Vec<MixingStep>,
    pub violations: usize,
}

/// Checks both mixing inequalities for `t = 1..=t_max`; `t = 0` is recorded only.
pub fn check_mixing_bound(g: &Graph, t_max: usize) -> Result<MixingReport> {
    let n = g.node_count();
    cap(n, 200)?;
    if !g.is_connected() {
        return Err(TadaError::Disconnected);
    }
    if g.is_bipartite() {
        return Err(TadaError::Bipartite);
    }
    let gap = spectral_summary(g)?.gap;
    let d: Vec<f64> = g.degrees().into_iter().map(|x| x as f64).collect();
    let two_m = 2.0 * g.edge_count() as f64;
    let mut p = DenseMatrix::<f64>::identity(n);
    let mut a = DenseMatrix::<f64>::identity(n);
    let mut steps = Vec::with_capacity(t_max + 1);
    let mut violations = 0;
    for t in 0..=t_max {
        if t > 0 {
            p = transition_multiply(g, &p)?;
            a = norm_adj_multiply(g, &a)?;
        }
        let envelope = (1.0 - gap).powi(t as i32);
        let (mut pdev, mut pratio, mut adev) = (0.0f64, 0.0f64, 0.0f64);
        let mut holds = true;
        for i in 0..n {
            for j in 0..n {
                let dp = (p[(i, j)] - d[j] / two_m).abs();
                let bound = (d[j] / d[i]).sqrt() * envelope;
                let da = (a[(i, j)] - (d[i] * d[j]).sqrt() / two_m).abs();
                pdev = pdev.max(dp);
                adev = adev.max(da);
                if bound > 0.0 {
                    pratio = pratio.max(dp / bound);
                }
                holds &= dp <= bound + 1e-9 && da <= envelope + 1e-9;
            }
        }
        let asserted = t > 0;
        if asserted && !holds {
            violations += 1;
        }
        steps.push(MixingStep {
            t,
            envelope,
            max_transition_dev: pdev,
            max_transition_ratio: pratio,
            max_normalized_dev: adev,
            asserted,
            holds,
        });
    }
    Ok(MixingReport { gap, steps, violations })
}

#[derive(Debug, Clone, Serialize)]
pub struct RowMoments {
    pub exact: f64,
    pub mean: f64,
    pub variance: f64,
    /// `2 d(v_i) ‖w‖² / k`.
    pub variance_bound: f64,
    /// `√(variance / trials)`.
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SketchMoments {
    pub trials: usize,
    pub k: usize,
    pub injective: bool,
    pub rows: Vec<RowMoments>,
}

impl SketchMoments {
    /// Rows whose mean misses the exact value by more than `z` standard errors.
    pub fn mean_outliers(&self, z: f64) -> usize {
        self.rows
            .iter()
            .filter(|r| (r.mean - r.exact).abs() > z * r.std_error + 1e-12)
            .count()
    }

    /// Rows whose variance exceeds `factor` times the bound.
    pub fn variance_outliers(&self, factor: f64) -> usize {
        self.rows.iter().filter(|r| r.variance > factor * r.variance_bound + 1e-12).count()
    }
}

/// Monte-Carlo moments of the estimator `((A Rᵀ)(R w))_i` of `(A w)_i` over
/// independently seeded sketches. With `k ≥ n` collision-free hashes are used.
pub fn count_sketch_moments(g: &Graph, w: &[f64], k: usize, trials: usize, seed: u64) -> Result<SketchMoments> {
    let n = g.node_count();
    if w.len() != n {
        return Err(TadaError::DimensionMismatch { what: "weight vector", expected: n, found: w.len() });
    }
    if trials < 1000 {
        return Err(TadaError::invalid("count_sketch_moments needs at least 1000 trials"));
    }
    let injective = k >= n;
    let exact: Vec<f64> = (0..n).map(|i| g.neighbors(i).iter().map(|&j| w[j]).sum()).collect();
    let mut mean = vec![0.0f64; n];
    let mut m2 = vec![0.0f64; n];
    for t in 0..trials {
        let s = derive_seed(seed, t as u64);
        let cs = if injective { CountSketch::injective(n, k, s)? } else { CountSketch::new(n, k, s)? };
        let ar = apply_count_sketch::<f64>(g, &cs)?;
        let rw = cs.project(w)?;
        let est = ar.matmul(&DenseMatrix::column(&rw))?;
        // Welford
        let cnt = (t + 1) as f64;
        for i in 0..n {
            let x = est[(i, 0)];
            let delta = x - mean[i];
            mean[i] += delta / cnt;
            m2[i] += delta * (x - mean[i]);
        }
    }
    let w2: f64 = w.iter().map(|x| x * x).sum();
    let rows = (0..n)
        .map(|i| {
            let variance = m2[i] / (trials - 1) as f64;
            RowMoments {
                exact: exact[i],
                mean: mean[i],
                variance,
                variance_bound: 2.0 * g.degree(i) as f64 * w2 / k as f64,
                std_error: (variance / trials as f64).sqrt(),
            }
        })
        .collect();
    Ok(SketchMoments { trials, k, injective, rows })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualReport {
    pub res_x: f64,
    pub res_xa: f64,
}

impl ResidualReport {
    pub fn nested(&self) -> bool {
        self.res_xa <= self.res_x + 1e-9
    }
}

/// `min_Ω ‖F Ω − C‖_F` by ridge-regularized normal equations.
pub fn least_squares_residual(f: &DenseMatrix<f64>, c: &DenseMatrix<f64>, ridge: f64) -> Result<f64> {
    let mut gram = f.t_matmul(f)?;
    for i in 0..gram.rows() {
        gram[(i, i)] += ridge;
    }
    let rhs = f.t_matmul(c)?;
    let omega = cholesky_solve(&gram, &rhs)?;
    Ok(f.matmul(&omega)?.sub(c)?.frobenius_norm())
}

fn cholesky_solve(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>) -> Result<DenseMatrix<f64>> {
    let n = a.rows();
    let mut l = DenseMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 {
            return Err(TadaError::invalid("normal equations are not positive definite"));
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    let mut x = b.clone();
    for col in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Best linear fit of `C` from `X` alone versus from `X‖A`.
pub fn residual_comparison(x: &DenseMatrix<f64>, a: &DenseMatrix<f64>, c: &DenseMatrix<f64>) -> Result<ResidualReport> {
    cap(x.rows(), 200)?;
    let ridge = 1e-10;
    Ok(ResidualReport {
        res_x: least_squares_residual(x, c, ridge)?,
        res_xa: least_squares_residual(&x.hconcat(a)?, c, ridge)?,
    })
}

/// `Σ_{t=0}^{T} (1−α) αᵗ Pᵗ E` with dense powers of `P`.
pub fn dense_rwr(g: &Graph, sources: &[usize], alpha: f64, steps: usize) -> Result<DenseMatrix<f64>> {
    let n = g.node_count();
    cap(n, ORACLE_CAP)?;
    let p = transition_matrix(g)?;
    let mut e = DenseMatrix::zeros(n, sources.len());
    for (c, &s) in sources.iter().enumerate() {
        if s >= n {
            return Err(TadaError::NodeOutOfRange { id: s, n });
        }
        e[(s, c)] = 1.0;
    }
    let mut power = DenseMatrix::<f64>::identity(n);
    let mut out = DenseMatrix::zeros(n, sources.len());
    let mut coef = 1.0 - alpha;
    for t in 0..=steps {
        if t > 0 {
            power = p.matmul(&power)?;
            coef *= alpha;
        }
        out = out.axpy(coef, &power.matmul(&e)?)?;
    }
    Ok(out)
}
