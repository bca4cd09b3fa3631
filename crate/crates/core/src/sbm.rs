//! Synthetic graphs: Erdős–Rényi and a stochastic block model with
//! block-indicator attributes plus Gaussian noise.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};

use crate::error::{Result, TadaError};
use crate::graph::Graph;
use crate::labels::{LabelVector, Split};
use crate::matrix::DenseMatrix;
use crate::rng::seeded;

/// Bernoulli(p) over a sequence of rows of pairs, using geometric skips.
/// `row_len(r)` is the number of pairs in row `r`; `emit(r, c)` receives hits.
fn skip_sample<R: Rng>(
    rows: usize,
    row_len: impl Fn(usize) -> usize,
    p: f64,
    rng: &mut R,
    mut emit: impl FnMut(usize, usize),
) {
    if p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for r in 0..rows {
            for c in 0..row_len(r) {
                emit(r, c);
            }
        }
        return;
    }
    let geo = Geometric::new(p).expect("0 < p < 1");
    let (mut r, mut c) = (0usize, 0u64);
    let mut skip = geo.sample(rng);
    while r < rows {
        let len = row_len(r) as u64;
        if c + skip >= len {
            skip -= len - c;
            r += 1;
            c = 0;
            continue;
        }
        c += skip;
        emit(r, c as usize);
        c += 1;
        skip = geo.sample(rng);
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(TadaError::invalid(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// G(n, p).
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    check_prob("p", p)?;
    let mut rng = seeded(seed, 0x4552);
    let mut edges = Vec::new();
    skip_sample(n, |i| n - 1 - i, p, &mut rng, |i, c| edges.push((i, i + 1 + c)));
    Ok(Graph::from_edges(n, edges)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmParams {
    pub n: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub attr_dim: usize,
    /// Standard deviation of the additive Gaussian attribute noise.
    pub noise: f64,
    pub seed: u64,
}

impl SbmParams {
    /// Block sizes are equal, so the expected degree is
    /// `(n/b − 1)·p_in + (n − n/b)·p_out`.
    pub fn expected_degree(&self) -> f64 {
        let s = (self.n / self.blocks) as f64;
        (s - 1.0) * self.p_in + (self.n as f64 - s) * self.p_out
    }
}

pub struct Sbm {
    pub graph: Graph,
    pub attributes: DenseMatrix<f64>,
    pub labels: LabelVector,
}

pub fn generate_sbm(params: &SbmParams) -> Result<Sbm> {
    let SbmParams { n, blocks, p_in, p_out, attr_dim, noise, seed } = *params;
    if blocks == 0 || n == 0 || n % blocks != 0 {
        return Err(TadaError::invalid(format!("n = {n} must be a positive multiple of blocks = {blocks}")));
    }
    check_prob("p_in", p_in)?;
    check_prob("p_out", p_out)?;
    if p_in <= p_out {
        return Err(TadaError::invalid("p_in must exceed p_out"));
    }
    if attr_dim < blocks {
        return Err(TadaError::invalid("attr_dim must be at least the number of blocks"));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(TadaError::invalid("noise must be a nonnegative number"));
    }
    let s = n / blocks;
    let mut rng = seeded(seed, 0x5342_4d00);
    let mut edges = Vec::new();
    for a in 0..blocks {
        let base_a = a * s;
        skip_sample(s, |i| s - 1 - i, p_in, &mut rng, |i, c| {
            edges.push((base_a + i, base_a + i + 1 + c))
        });
        for b in a + 1..blocks {
            let base_b = b * s;
            skip_sample(s, |_| s, p_out, &mut rng, |i, c| edges.push((base_a + i, base_b + c)));
        }
    }
    let graph = Graph::from_edges(n, edges)?.0;
    let labels: Vec<usize> = (0..n).map(|i| i / s).collect();

    let mut rng = seeded(seed, 0x5842_4d01);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let attributes = DenseMatrix::from_fn(n, attr_dim, |r, c| {
        let signal = if labels[r] == c { 1.0 } else { 0.0 };
        signal + noise * normal.sample(&mut rng)
    });

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed, 0x5350_4c54));
    let n_train = n * 6 / 10;
    let n_val = n * 2 / 10;
    let mut splits = vec![Split::Test; n];
    for (pos, &i) in order.iter().enumerate() {
        splits[i] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(Sbm { graph, attributes, labels: LabelVector::new(labels, splits)? })
}
