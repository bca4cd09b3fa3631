//! Front-mounted graph augmentation for high-degree graphs.
//!
//! The pipeline sketches the adjacency matrix (Count-Sketch plus RWR-Sketch),
//! turns the sketch and node attributes into task-aware initial features, and
//! uses those features to reweight and prune edges. Dense brute-force oracles
//! in [`oracles`] check the supporting bounds on small graphs.

pub mod classifier;
pub mod error;
pub mod expander;
pub mod graph;
pub mod io;
pub mod labels;
pub mod matrix;
pub mod oracles;
pub mod pipeline;
pub mod propagate;
pub mod rng;
pub mod sbm;
pub mod scalar;
pub mod sketch;
pub mod sparsify;

pub use error::{Result, TadaError};
pub use graph::{Adjacency, BuildReport, Graph, WeightedGraph};
pub use labels::{LabelVector, Split};
pub use matrix::DenseMatrix;
pub use scalar::Scalar;

/// Double-precision dense matrix, the default working type.
pub type Matrix = DenseMatrix<f64>;
/// Single-precision dense matrix (matches the on-disk `TADA` element type).
pub type Matrix32 = DenseMatrix<f32>;
/// Node attribute matrix `X` (`n × d`).
pub type AttributeMatrix = DenseMatrix<f64>;
pub type WeightedGraph64 = WeightedGraph<f64>;
