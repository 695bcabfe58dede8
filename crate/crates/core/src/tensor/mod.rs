//! Minimal deterministic numeric core.
//!
//! All arithmetic is `f64`; files narrow to `f32` on write. Every kernel
//! accumulates in a fixed order so results are bit-reproducible.

mod adapter;
pub mod gradcheck;
mod linear;
mod loss;
mod matrix;
mod mlp;
mod optim;
mod train;

pub use adapter::{AdapterBlock, AdapterTrace, DEFAULT_REDUCTION};
pub use linear::Linear;
pub use loss::{cross_entropy_loss, log_softmax_row, softmax};
pub use matrix::Matrix;
pub use mlp::{MlpParams, MlpTrace};
pub use optim::{AdamWConfig, OptimizerState, Parameters};
pub use train::{accuracy, predict_classes, train_mlp, Probe, TrainConfig, TrainOutcome};
pub(crate) use train::{epoch_order, epoch_records};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch, expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("gold class {class} at row {row} is outside [0, {classes})")]
    ClassOutOfRange {
        row: usize,
        class: usize,
        classes: usize,
    },
    #[error("non-finite gradient in parameter tensor {tensor}; step skipped")]
    NonFiniteGradient { tensor: usize },
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

pub(crate) fn shape_err(op: &'static str, expected: impl ToString, found: impl ToString) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

/// Siamese pair features `[u, v, u - v, u * v]`.
pub fn siamese_features(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(shape_err("siamese_features", u.len(), v.len()));
    }
    let mut out = Vec::with_capacity(4 * u.len());
    out.extend_from_slice(u);
    out.extend_from_slice(v);
    out.extend(u.iter().zip(v).map(|(a, b)| a - b));
    out.extend(u.iter().zip(v).map(|(a, b)| a * b));
    Ok(out)
}

/// Row-wise [`siamese_features`] over two aligned `n x d` matrices.
pub fn siamese_matrix(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    if u.rows() != v.rows() || u.cols() != v.cols() {
        return Err(shape_err(
            "siamese_matrix",
            format!("{}x{}", u.rows(), u.cols()),
            format!("{}x{}", v.rows(), v.cols()),
        ));
    }
    let mut data = Vec::with_capacity(u.rows() * u.cols() * 4);
    for i in 0..u.rows() {
        data.extend(siamese_features(u.row(i), v.row(i))?);
    }
    Matrix::from_vec(u.rows(), 4 * u.cols(), data)
}
