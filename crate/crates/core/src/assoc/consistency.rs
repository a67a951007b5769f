//! Objective-subjective consistency: overnight wake probability and
//! prediction-derived sleep efficiency against normalised PSQI.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::AssocError;
use crate::model::ProbabilityMatrix;
use crate::Stage;

/// Mean wake-column probability over all epochs.
pub fn wake_probability(p: &ProbabilityMatrix) -> Result<f64, AssocError> {
    if p.n_rows() == 0 {
        return Err(AssocError::Empty("probability matrix".into()));
    }
    if p.n_classes() != 5 {
        return Err(AssocError::Shape(format!("expected 5 classes, got {}", p.n_classes())));
    }
    Ok(p.rows().map(|r| r[Stage::W.index()]).sum::<f64>() / p.n_rows() as f64)
}

/// Percentage of non-wake epochs.
pub fn sleep_efficiency_from_predictions(stages: &[Stage]) -> Result<f64, AssocError> {
    if stages.is_empty() {
        return Err(AssocError::Empty("stage predictions".into()));
    }
    Ok(100.0 * stages.iter().filter(|s| s.is_sleep()).count() as f64 / stages.len() as f64)
}

pub const PSQI_MAX: u32 = 21;

pub fn psqi_normalize(score: u32) -> Result<f64, AssocError> {
    if score > PSQI_MAX {
        return Err(AssocError::Psqi(score));
    }
    Ok(score as f64 / PSQI_MAX as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyResult {
    pub metric: String,
    pub n: usize,
    pub r: f64,
    pub p: f64,
    /// Least-squares slope `a` and intercept `b` of `y = a x + b`.
    pub slope: f64,
    pub intercept: f64,
    /// Residual standard error.
    pub residual_se: f64,
    pub x_mean: f64,
    pub sxx: f64,
    /// Two-sided 97.5% t quantile with n − 2 degrees of freedom.
    pub t_crit: f64,
}

impl ConsistencyResult {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// 95% confidence band for the mean response at `x`.
    pub fn band(&self, x: f64) -> (f64, f64) {
        let y = self.predict(x);
        let dx = x - self.x_mean;
        let half = self.t_crit * self.residual_se * (1.0 / self.n as f64 + dx * dx / self.sxx).sqrt();
        (y - half, y + half)
    }
}

pub fn pearson_regression(metric: &str, x: &[f64], y: &[f64]) -> Result<ConsistencyResult, AssocError> {
    let n = x.len();
    if n != y.len() {
        return Err(AssocError::Shape(format!("{} x values vs {} y values", n, y.len())));
    }
    if n < 3 {
        return Err(AssocError::GroupSize { a: n, b: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(AssocError::ZeroVariance(metric.to_string()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let dist = StudentsT::new(0.0, 1.0, df).expect("n >= 3");
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    Ok(ConsistencyResult {
        metric: metric.to_string(),
        n,
        r,
        p,
        slope,
        intercept,
        residual_se: (sse / df).sqrt(),
        x_mean: mx,
        sxx,
        t_crit: dist.inverse_cdf(0.975),
    })
}
