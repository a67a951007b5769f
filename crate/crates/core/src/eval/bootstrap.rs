use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::stats::percentile_sorted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    /// Mean over the defined replicates.
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Metric on the full sample.
    pub plug_in: Option<f64>,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    /// Replicates on which the metric was undefined.
    pub dropped: usize,
}

/// Resample indices for replicate `r`. Each replicate owns the ChaCha
/// stream `r` under `seed`, so results do not depend on scheduling.
pub fn replicate_indices(n: usize, seed: u64, r: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

/// Percentile bootstrap over `n` units. `metric` receives the resampled
/// indices and returns `None` when undefined.
pub fn bootstrap_ci<F>(n: usize, b: usize, seed: u64, metric: F) -> Result<MetricEstimate, EvalError>
where
    F: Fn(&[usize]) -> Option<f64> + Sync,
{
    if n == 0 {
        return Err(EvalError::Empty("bootstrap sample".into()));
    }
    if b == 0 {
        return Err(EvalError::Empty("bootstrap replicates".into()));
    }
    let one = |r: usize| metric(&replicate_indices(n, seed, r));
    #[cfg(feature = "parallel")]
    let values: Vec<Option<f64>> = {
        use rayon::prelude::*;
        (0..b).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<Option<f64>> = (0..b).map(one).collect();

    let mut kept: Vec<f64> = values.into_iter().flatten().filter(|v| v.is_finite()).collect();
    let dropped = b - kept.len();
    if kept.is_empty() {
        return Err(EvalError::Undefined);
    }
    if dropped > 0 {
        log::warn!("{dropped} of {b} bootstrap replicates undefined and dropped");
    }
    let point = kept.iter().sum::<f64>() / kept.len() as f64;
    kept.sort_by(f64::total_cmp);
    let all: Vec<usize> = (0..n).collect();
    Ok(MetricEstimate {
        point,
        ci_low: percentile_sorted(&kept, 2.5).unwrap(),
        ci_high: percentile_sorted(&kept, 97.5).unwrap(),
        plug_in: metric(&all),
        b,
        seed,
        dropped,
    })
}
