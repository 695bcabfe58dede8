//! Orthogonal-projection debiasing.
//!
//! A main branch and a naive branch feed one classifier. During training the
//! loss sees `F_L`, the main logits with their component in the span of the
//! naive-only logits projected out; at inference the naive block is zeroed.

mod head;
mod io;
mod naive;
mod project;
mod train;

pub use head::{HexHead, HexOutput, DEFAULT_LAMBDA, LAMBDA_FLOOR};
pub use io::{load_head, save_head};
pub use naive::{overlap_fraction, tokenize, NaiveFeaturizer, DEFAULT_NAIVE_DIM};
pub use project::{hex_project, hex_project_with_cache, Projection, ProjectionGrad};
pub use train::{train_hex, HexConfig, HexOutcome, LAMBDA_WARN};

use thiserror::Error;

use crate::tensor::{Matrix, TensorError};

#[derive(Debug, Error)]
pub enum HexError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("lambda must be finite and non-negative, got {0}")]
    BadLambda(f64),
    #[error("F_Gᵀ F_G + λI is not positive definite (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("projection solve failed at epoch {epoch}, batch {batch} (pivot {pivot:e} at column {column})")]
    Solver {
        epoch: usize,
        batch: usize,
        column: usize,
        pivot: f64,
    },
    #[error("head parameters: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, HexError>;

/// Inference logits `f([U, 0])`.
pub fn hex_infer(head: &HexHead, x_main: &Matrix) -> Result<Matrix> {
    head.infer(x_main)
}

/// Training-time logits `(F_A, F_G, F_L)`.
pub fn hex_forward(head: &HexHead, x_main: &Matrix, x_naive: &Matrix) -> Result<HexOutput> {
    head.forward(x_main, x_naive)
}
