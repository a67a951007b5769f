//! Recording-level splits, classification metrics, threshold search and
//! epoch-level bootstrap intervals.

mod bootstrap;
mod metrics;
mod split;
mod threshold;

use std::collections::BTreeMap;

use thiserror::Error;

pub use bootstrap::{bootstrap_ci, replicate_indices, MetricEstimate};
pub use metrics::{
    auc, binary_counts, binary_metrics, f1_from_counts, staging_metrics, BinaryMetrics, ConfusionMatrix,
    StagingMetrics,
};
pub use split::{allocate, split_recordings, SplitManifest, SplitRatios, SPLIT_FILES};
pub use threshold::{threshold_grid, threshold_search, ThresholdChoice, GRID_HIGH, GRID_LOW, GRID_SIZE};

use crate::model::ProbabilityMatrix;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("split ratios {0:?} must be non-negative and sum to 1")]
    Ratios([f64; 3]),
    #[error("empty {0}")]
    Empty(String),
    #[error("duplicate paths in split input")]
    Duplicate,
    #[error("length mismatch: {truth} labels vs {other}")]
    Length { truth: usize, other: usize },
    #[error("label {0} out of range")]
    Label(usize),
    #[error("score {0} outside [0, 1]")]
    Score(f64),
    #[error("expected a 5-class matrix, got {0}")]
    Classes(usize),
    #[error("validation set has no positive labels")]
    SingleClass,
    #[error("metric undefined on every bootstrap replicate")]
    Undefined,
}

/// Bootstrap intervals for accuracy, weighted F1, κ and (if probabilities
/// are given) macro AUC, resampling epochs.
pub fn bootstrap_staging(
    truth: &[usize],
    pred: &[usize],
    probs: Option<&ProbabilityMatrix>,
    k: usize,
    b: usize,
    seed: u64,
) -> Result<BTreeMap<String, MetricEstimate>, EvalError> {
    staging_metrics(truth, pred, probs, k)?;
    let pick = |idx: &[usize]| -> (Vec<usize>, Vec<usize>) {
        (idx.iter().map(|&i| truth[i]).collect(), idx.iter().map(|&i| pred[i]).collect())
    };
    let cm = |idx: &[usize]| {
        let (t, p) = pick(idx);
        ConfusionMatrix::from_labels(&t, &p, k).ok()
    };
    let n = truth.len();
    let mut out = BTreeMap::new();
    out.insert("accuracy".to_string(), bootstrap_ci(n, b, seed, |i| cm(i)?.accuracy())?);
    out.insert("weighted_f1".to_string(), bootstrap_ci(n, b, seed, |i| cm(i)?.weighted_f1())?);
    if let Ok(e) = bootstrap_ci(n, b, seed, |i| cm(i)?.kappa()) {
        out.insert("kappa".to_string(), e);
    }
    if let Some(p) = probs {
        let macro_auc = |idx: &[usize]| {
            let mut aucs = Vec::new();
            for c in 0..k {
                let t: Vec<bool> = idx.iter().map(|&i| truth[i] == c).collect();
                let s: Vec<f64> = idx.iter().map(|&i| p.row(i)[c]).collect();
                if let Some(a) = auc(&t, &s) {
                    aucs.push(a);
                }
            }
            crate::stats::mean(&aucs)
        };
        if let Ok(e) = bootstrap_ci(n, b, seed, macro_auc) {
            out.insert("macro_auc".to_string(), e);
        }
    }
    Ok(out)
}
