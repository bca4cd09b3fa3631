//! Sparse-times-dense propagation kernels: `P·M` and `Ã·M`.
//!
//! `P = D⁻¹A` and `Ã = D^{-1/2} A D^{-1/2}`. Rows belonging to zero-degree
//! nodes are all-zero in both operators. Each output row is computed
//! independently, in neighbor order, so results do not depend on how rows are
//! scheduled.

use crate::error::{Result, TadaError};
use crate::graph::Adjacency;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

fn check_rows<T: Scalar, G: Adjacency<T>>(g: &G, m: &DenseMatrix<T>) -> Result<()> {
    if m.rows() != g.node_count() {
        return Err(TadaError::DimensionMismatch {
            what: "propagation input rows",
            expected: g.node_count(),
            found: m.rows(),
        });
    }
    Ok(())
}

/// `P·M` with `P = D⁻¹A` (weighted degrees for weighted graphs).
pub fn transition_multiply<T: Scalar, G: Adjacency<T>>(
    g: &G,
    m: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    check_rows(g, m)?;
    let cols = m.cols();
    let mut out = DenseMatrix::zeros(m.rows(), cols);
    for i in 0..g.node_count() {
        let d = g.row_degree(i);
        if d <= T::zero() {
            continue;
        }
        let inv = d.recip();
        let row = out.row_mut(i);
        g.for_each_neighbor(i, |j, a| {
            let coef = a * inv;
            for (o, &x) in row.iter_mut().zip(m.row(j)) {
                *o += coef * x;
            }
        });
    }
    Ok(out)
}

/// `Ã·M` with `Ã = D^{-1/2} A D^{-1/2}`.
pub fn norm_adj_multiply<T: Scalar, G: Adjacency<T>>(
    g: &G,
    m: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    check_rows(g, m)?;
    let inv_sqrt: Vec<T> = (0..g.node_count())
        .map(|i| {
            let d = g.row_degree(i);
            if d > T::zero() {
                d.sqrt().recip()
            } else {
                T::zero()
            }
        })
        .collect();
    let cols = m.cols();
    let mut out = DenseMatrix::zeros(m.rows(), cols);
    for i in 0..g.node_count() {
        if inv_sqrt[i] == T::zero() {
            continue;
        }
        let row = out.row_mut(i);
        g.for_each_neighbor(i, |j, a| {
            let coef = a * inv_sqrt[i] * inv_sqrt[j];
            for (o, &x) in row.iter_mut().zip(m.row(j)) {
                *o += coef * x;
            }
        });
    }
    Ok(out)
}

/// `Ã^layers · M`.
pub fn norm_adj_power_multiply<T: Scalar, G: Adjacency<T>>(
    g: &G,
    m: &DenseMatrix<T>,
    layers: usize,
) -> Result<DenseMatrix<T>> {
    check_rows(g, m)?;
    let mut cur = m.clone();
    for _ in 0..layers {
        cur = norm_adj_multiply(g, &cur)?;
    }
    Ok(cur)
}
