//! Feature expander: topology and attribute embeddings combined into `H⁽⁰⁾`,
//! with a single-layer softmax head used to pre-train every weight.
//!
//! ```text
//! H_topo = relu(A′ · W_topo)
//! H_attr = relu(X  · W_attr)
//! H⁽⁰⁾   = (1 − γ) · H_attr + γ · H_topo
//! ```

use std::io::{BufRead, Read, Write};

use crate::classifier::{affine, cross_entropy, glorot_uniform};
use crate::error::{Result, TadaError};
use crate::io::{read_dense_binary, read_key_values, write_dense_binary, write_key_values};
use crate::labels::{LabelVector, Split};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpanderParams<T> {
    pub w_topo: DenseMatrix<T>,
    pub w_attr: DenseMatrix<T>,
    pub w_cls: DenseMatrix<T>,
    pub b_cls: Vec<T>,
    pub gamma: f64,
}

impl<T: Scalar> ExpanderParams<T> {
    /// Uniform Glorot init drawn in the order `W_topo`, `W_attr`, `W_cls`.
    pub fn init(k: usize, d: usize, h: usize, classes: usize, gamma: f64, seed: u64) -> Result<Self> {
        check_gamma(gamma)?;
        let mut rng = crate::rng::seeded(seed, 0x6578_7061);
        Ok(Self {
            w_topo: glorot_uniform(k, h, &mut rng),
            w_attr: glorot_uniform(d, h, &mut rng),
            w_cls: glorot_uniform(h, classes, &mut rng),
            b_cls: vec![T::zero(); classes],
            gamma,
        })
    }

    pub fn hidden(&self) -> usize {
        self.w_topo.cols()
    }

    pub fn classes(&self) -> usize {
        self.w_cls.cols()
    }

    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        let h = self.w_topo.cols();
        if self.w_attr.cols() != h {
            return Err(TadaError::DimensionMismatch { what: "W_attr columns", expected: h, found: self.w_attr.cols() });
        }
        if self.w_cls.rows() != h {
            return Err(TadaError::DimensionMismatch { what: "W_cls rows", expected: h, found: self.w_cls.rows() });
        }
        if self.b_cls.len() != self.w_cls.cols() {
            return Err(TadaError::DimensionMismatch {
                what: "b_cls length",
                expected: self.w_cls.cols(),
                found: self.b_cls.len(),
            });
        }
        self.w_topo.ensure_finite("W_topo")?;
        self.w_attr.ensure_finite("W_attr")?;
        self.w_cls.ensure_finite("W_cls")?;
        if self.b_cls.iter().any(|v| !v.is_finite()) {
            return Err(TadaError::NonFinite("b_cls"));
        }
        Ok(())
    }

    /// Writes the four weight blocks back to back, plus a key=value manifest.
    pub fn write<W1: Write, W2: Write>(&self, mut data: W1, manifest: W2) -> Result<()> {
        let bias = DenseMatrix::from_vec(1, self.b_cls.len(), self.b_cls.clone())?;
        let blocks = [("W_topo", &self.w_topo), ("W_attr", &self.w_attr), ("W_cls", &self.w_cls), ("b_cls", &bias)];
        let mut pairs = vec![("format", "tada-params".to_string()), ("gamma", format!("{:.17e}", self.gamma))];
        let mut order = Vec::new();
        for (name, m) in blocks {
            write_dense_binary(m, &mut data)?;
            order.push(format!("{name}:{}x{}", m.rows(), m.cols()));
        }
        pairs.push(("blocks", order.join(",")));
        write_key_values(&pairs, manifest)
    }

    pub fn read<R1: Read, R2: BufRead>(mut data: R1, manifest: R2) -> Result<Self> {
        let kv = read_key_values(manifest)?;
        if kv.get("format").map(String::as_str) != Some("tada-params") {
            return Err(TadaError::Format("params manifest lacks format=tada-params".into()));
        }
        let gamma: f64 = kv
            .get("gamma")
            .and_then(|g| g.parse().ok())
            .ok_or_else(|| TadaError::Format("params manifest lacks gamma".into()))?;
        let w_topo = read_dense_binary(&mut data)?;
        let w_attr = read_dense_binary(&mut data)?;
        let w_cls = read_dense_binary(&mut data)?;
        let bias: DenseMatrix<T> = read_dense_binary(&mut data)?;
        let p = Self { w_topo, w_attr, w_cls, b_cls: bias.into_vec(), gamma };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialFeatures<T> {
    pub h0: DenseMatrix<T>,
    pub gamma: f64,
    pub loss_trace: Vec<f64>,
}

impl<T> InitialFeatures<T> {
    /// Fraction of consecutive epoch pairs where the loss did not go up.
    pub fn monotone_fraction(&self) -> f64 {
        if self.loss_trace.len() < 2 {
            return 1.0;
        }
        let ok = self.loss_trace.windows(2).filter(|w| w[1] <= w[0]).count();
        ok as f64 / (self.loss_trace.len() - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub hidden: usize,
    pub gamma: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { hidden: 128, gamma: 0.5, epochs: 128, lr: 0.05, seed: 0 }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(TadaError::invalid(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(())
}

/// `max(0, M·W)`.
pub fn relu_affine<T: Scalar>(m: &DenseMatrix<T>, w: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    Ok(m.matmul(w)?.map(|v| v.max(T::zero())))
}

/// `(1 − γ)·H_attr + γ·H_topo`; the extremes return one input unchanged.
pub fn combine<T: Scalar>(h_attr: &DenseMatrix<T>, h_topo: &DenseMatrix<T>, gamma: f64) -> Result<DenseMatrix<T>> {
    check_gamma(gamma)?;
    for (what, expected, found) in [
        ("combine operand rows", h_attr.rows(), h_topo.rows()),
        ("combine operand columns", h_attr.cols(), h_topo.cols()),
    ] {
        if expected != found {
            return Err(TadaError::DimensionMismatch { what, expected, found });
        }
    }
    if gamma == 0.0 {
        return Ok(h_attr.clone());
    }
    if gamma == 1.0 {
        return Ok(h_topo.clone());
    }
    let g = T::of(gamma);
    h_attr.scale(T::one() - g).axpy(g, h_topo)
}

struct Forward<T> {
    z_topo: DenseMatrix<T>,
    z_attr: DenseMatrix<T>,
    h0: DenseMatrix<T>,
}

fn check_inputs<T: Scalar>(a: &DenseMatrix<T>, x: &DenseMatrix<T>, p: &ExpanderParams<T>) -> Result<()> {
    if a.rows() != x.rows() {
        return Err(TadaError::DimensionMismatch { what: "attribute rows", expected: a.rows(), found: x.rows() });
    }
    if a.cols() != p.w_topo.rows() {
        return Err(TadaError::DimensionMismatch { what: "W_topo rows", expected: a.cols(), found: p.w_topo.rows() });
    }
    if x.cols() != p.w_attr.rows() {
        return Err(TadaError::DimensionMismatch { what: "W_attr rows", expected: x.cols(), found: p.w_attr.rows() });
    }
    Ok(())
}

fn forward<T: Scalar>(a: &DenseMatrix<T>, x: &DenseMatrix<T>, p: &ExpanderParams<T>) -> Result<Forward<T>> {
    check_inputs(a, x, p)?;
    let z_topo = a.matmul(&p.w_topo)?;
    let z_attr = x.matmul(&p.w_attr)?;
    let relu = |v: T| v.max(T::zero());
    let h0 = combine(&z_attr.map(relu), &z_topo.map(relu), p.gamma)?;
    Ok(Forward { z_topo, z_attr, h0 })
}

/// `H⁽⁰⁾` from a sketched adjacency `A′` (n×k) and attributes `X` (n×d).
pub fn forward_initial_features<T: Scalar>(
    a: &DenseMatrix<T>,
    x: &DenseMatrix<T>,
    params: &ExpanderParams<T>,
) -> Result<InitialFeatures<T>> {
    let f = forward(a, x, params)?;
    Ok(InitialFeatures { h0: f.h0, gamma: params.gamma, loss_trace: Vec::new() })
}

/// Gradients of the pre-training loss, one per weight block.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub w_topo: DenseMatrix<T>,
    pub w_attr: DenseMatrix<T>,
    pub w_cls: DenseMatrix<T>,
    pub b_cls: Vec<T>,
}

/// Mean softmax cross-entropy over `rows` and its analytic gradient.
pub fn loss_and_gradients<T: Scalar>(
    a: &DenseMatrix<T>,
    x: &DenseMatrix<T>,
    labels: &[usize],
    rows: &[usize],
    p: &ExpanderParams<T>,
) -> Result<(T, Gradients<T>)> {
    let f = forward(a, x, p)?;
    let logits = affine(&f.h0, &p.w_cls, &p.b_cls)?;
    let (loss, dz) = cross_entropy(&logits, labels, rows);
    let w_cls = f.h0.t_matmul(&dz)?;
    let b_cls = dz.column_sums();
    let dh = dz.matmul_t(&p.w_cls)?;
    let g = T::of(p.gamma);
    let mask = |z: &DenseMatrix<T>, s: T| {
        DenseMatrix::from_fn(z.rows(), z.cols(), |r, c| if z[(r, c)] > T::zero() { s * dh[(r, c)] } else { T::zero() })
    };
    let w_topo = a.t_matmul(&mask(&f.z_topo, g))?;
    let w_attr = x.t_matmul(&mask(&f.z_attr, T::one() - g))?;
    Ok((loss, Gradients { w_topo, w_attr, w_cls, b_cls }))
}

/// Full-batch gradient descent on the train split for `cfg.epochs` epochs.
pub fn pretrain<T: Scalar>(
    a: &DenseMatrix<T>,
    x: &DenseMatrix<T>,
    y: &LabelVector,
    cfg: &PretrainConfig,
) -> Result<(ExpanderParams<T>, InitialFeatures<T>)> {
    if cfg.hidden == 0 {
        return Err(TadaError::invalid("hidden dimension must be positive"));
    }
    if !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return Err(TadaError::invalid(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    y.ensure_len(a.rows())?;
    a.ensure_finite("sketched adjacency")?;
    x.ensure_finite("attributes")?;
    let rows = y.indices(Split::Train);
    if rows.is_empty() {
        return Err(TadaError::EmptySplit("train"));
    }
    let mut p = ExpanderParams::init(a.cols(), x.cols(), cfg.hidden, y.num_classes(), cfg.gamma, cfg.seed)?;
    check_inputs(a, x, &p)?;
    let lr = T::of(cfg.lr);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, g) = loss_and_gradients(a, x, y.labels(), &rows, &p)?;
        if !loss.is_finite() {
            return Err(TadaError::NanLoss { epoch });
        }
        trace.push(loss.to_f64_lossy());
        p.w_topo = p.w_topo.axpy(-lr, &g.w_topo)?;
        p.w_attr = p.w_attr.axpy(-lr, &g.w_attr)?;
        p.w_cls = p.w_cls.axpy(-lr, &g.w_cls)?;
        for (b, d) in p.b_cls.iter_mut().zip(g.b_cls) {
            *b -= lr * d;
        }
    }
    let mut feats = forward_initial_features(a, x, &p)?;
    feats.loss_trace = trace;
    Ok((p, feats))
}

/// Training-split accuracy of the pre-training head.
pub fn head_accuracy<T: Scalar>(
    a: &DenseMatrix<T>,
    x: &DenseMatrix<T>,
    y: &LabelVector,
    split: Split,
    p: &ExpanderParams<T>,
) -> Result<f64> {
    let f = forward(a, x, p)?;
    let pred = crate::classifier::argmax_rows(&affine(&f.h0, &p.w_cls, &p.b_cls)?);
    Ok(crate::classifier::accuracy(&pred, y.labels(), &y.indices(split)))
}
