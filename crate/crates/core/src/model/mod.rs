//! Windowed epoch classifier, losses, probability matrices and class
//! collapsing.
//!
//! The bundled network is a deliberately small stand-in with the same input
//! and output contract as a deep sequence model; probabilities produced
//! elsewhere enter through [`ingest_probabilities`].

mod collapse;
mod loss;
mod mlp;
mod probs;
mod train;
mod window;

use thiserror::Error;

pub use collapse::{collapse_classes, collapse_labels, Granularity};
pub use loss::{cross_entropy, loss_multitask, loss_sleep, softmax, softmax_ce_grad, PROB_CLAMP};
pub use mlp::{Architecture, Checkpoint, Classifier, Dense, Tensor, CHECKPOINT_FORMAT};
pub use probs::{ingest_probabilities, ProbabilityMatrix, FILE_ROW_TOLERANCE, PROB_MAGIC, ROW_TOLERANCE};
pub use train::{accuracy, train, Dataset, Optimizer, TrainConfig, TrainReport};
pub use window::{build_windows, ContextWindow, Windows, DEFAULT_WINDOW};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("context window width must be odd and positive, got {0}")]
    InvalidWindow(usize),
    #[error("non-finite loss {loss} at pass {pass}, batch {batch}")]
    NonFinite { pass: usize, batch: usize, loss: f64 },
    #[error("probability row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },
    #[error("probability file has {rows} rows but there are {labels} labelled epochs")]
    CountMismatch { rows: usize, labels: usize },
    #[error("probability file: {0}")]
    Format(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("granularity must be 5, 4, 3 or 2; got {0}")]
    InvalidGranularity(u8),
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
