//! Softmax regression with full-batch gradient descent.
//!
//! Shared by the pre-training head of the feature expander and by the
//! downstream linear evaluator.

use crate::error::{Result, TadaError};
use crate::labels::LabelVector;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Numerically stable row-wise softmax.
pub fn softmax_rows<T: Scalar>(logits: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy over `rows`, plus `∂loss/∂logits` (zero outside `rows`).
pub fn cross_entropy<T: Scalar>(
    logits: &DenseMatrix<T>,
    labels: &[usize],
    rows: &[usize],
) -> (T, DenseMatrix<T>) {
    let probs = softmax_rows(logits);
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let scale = T::of_usize(rows.len()).recip();
    let mut loss = T::zero();
    for &r in rows {
        let y = labels[r];
        let p = probs.row(r);
        // log-softmax computed from logits for stability
        let z = logits.row(r);
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = z.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        loss += lse - z[y];
        let g = grad.row_mut(r);
        for (c, (gv, &pv)) in g.iter_mut().zip(p).enumerate() {
            *gv = (pv - if c == y { T::one() } else { T::zero() }) * scale;
        }
    }
    (loss * scale, grad)
}

/// Row-wise arg-max, ties to the lower class index.
pub fn argmax_rows<T: Scalar>(m: &DenseMatrix<T>) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(pred: &[usize], labels: &[usize], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let hits = rows.iter().filter(|&&r| pred[r] == labels[r]).count();
    hits as f64 / rows.len() as f64
}

/// Uniform Glorot initialization in `±√(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar, R: rand::Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> DenseMatrix<T> {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    DenseMatrix::from_fn(fan_in, fan_out, |_, _| T::of(rng.gen_range(-limit..=limit)))
}

/// `M·W + 1·bᵀ`.
pub fn affine<T: Scalar>(m: &DenseMatrix<T>, w: &DenseMatrix<T>, b: &[T]) -> Result<DenseMatrix<T>> {
    if b.len() != w.cols() {
        return Err(TadaError::DimensionMismatch {
            what: "bias length",
            expected: w.cols(),
            found: b.len(),
        });
    }
    let mut out = m.matmul(w)?;
    for r in 0..out.rows() {
        for (o, &bv) in out.row_mut(r).iter_mut().zip(b) {
            *o += bv;
        }
    }
    Ok(out)
}

/// Linear softmax classifier `softmax(F·W + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxRegression<T> {
    pub weights: DenseMatrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> SoftmaxRegression<T> {
    pub fn init<R: rand::Rng>(features: usize, classes: usize, rng: &mut R) -> Self {
        Self {
            weights: glorot_uniform(features, classes, rng),
            bias: vec![T::zero(); classes],
        }
    }

    pub fn logits(&self, f: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        affine(f, &self.weights, &self.bias)
    }

    pub fn predict(&self, f: &DenseMatrix<T>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(f)?))
    }

    /// Full-batch gradient descent on the mean cross-entropy of `rows`.
    /// Returns the loss before each update.
    pub fn fit(
        &mut self,
        f: &DenseMatrix<T>,
        y: &LabelVector,
        rows: &[usize],
        epochs: usize,
        lr: f64,
    ) -> Result<Vec<f64>> {
        if rows.is_empty() {
            return Err(TadaError::EmptySplit("train"));
        }
        let lr = T::of(lr);
        let mut trace = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            let logits = self.logits(f)?;
            let (loss, dz) = cross_entropy(&logits, y.labels(), rows);
            if !loss.is_finite() {
                return Err(TadaError::NanLoss { epoch });
            }
            trace.push(loss.to_f64_lossy());
            let dw = f.t_matmul(&dz)?;
            let db = dz.column_sums();
            self.weights = self.weights.axpy(-lr, &dw)?;
            for (b, g) in self.bias.iter_mut().zip(db) {
                *b -= lr * g;
            }
        }
        Ok(trace)
    }
}

/// Column standardization: zero mean and unit variance per column; columns
/// with zero variance are only centered.
pub fn standardize_columns<T: Scalar>(x: &DenseMatrix<T>) -> DenseMatrix<T> {
    let n = x.rows();
    if n == 0 {
        return x.clone();
    }
    let nt = T::of_usize(n);
    let means: Vec<T> = x.column_sums().into_iter().map(|s| s / nt).collect();
    let mut vars = vec![T::zero(); x.cols()];
    for r in 0..n {
        for ((v, &m), &xv) in vars.iter_mut().zip(&means).zip(x.row(r)) {
            *v += (xv - m) * (xv - m);
        }
    }
    let inv_std: Vec<T> = vars
        .iter()
        .map(|&v| {
            let sd = (v / nt).sqrt();
            if sd > T::of(1e-12) {
                sd.recip()
            } else {
                T::one()
            }
        })
        .collect();
    DenseMatrix::from_fn(n, x.cols(), |r, c| (x[(r, c)] - means[c]) * inv_std[c])
}
