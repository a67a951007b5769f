//! Two-sample tests and p-value formatting.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use super::AssocError;
use crate::stats::{mean, midranks, std_dev};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    #[default]
    MannWhitney,
    WelchT,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::MannWhitney => "Mann-Whitney U (two-sided, normal approximation)",
            TestKind::WelchT => "Welch t (two-sided)",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `U` for sample `a`: pairs with a > b plus half the ties.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let na = a.len() as f64;
    ranks[..a.len()].iter().sum::<f64>() - na * (na + 1.0) / 2.0
}

/// Two-sided Mann-Whitney with tie-corrected variance and continuity
/// correction. Reports `min(U_a, U_b)`.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> TestResult {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let ua = mann_whitney_u(a, b);
    let ub = na * nb - ua;
    let mu = na * nb / 2.0;

    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1] == pooled[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((ua - mu).abs() - 0.5).max(0.0) / var.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    TestResult { statistic: ua.min(ub), p_value: p }
}

pub fn welch_t(a: &[f64], b: &[f64]) -> TestResult {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a).unwrap(), mean(b).unwrap());
    let va = std_dev(a, 1).unwrap().powi(2) / na;
    let vb = std_dev(b, 1).unwrap().powi(2) / nb;
    let se2 = va + vb;
    if se2 == 0.0 {
        let p = if ma == mb { 1.0 } else { 0.0 };
        return TestResult { statistic: if ma == mb { 0.0 } else { f64::INFINITY }, p_value: p };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    TestResult { statistic: t, p_value: (2.0 * dist.sf(t.abs())).min(1.0) }
}

pub fn two_sample_test(kind: TestKind, a: &[f64], b: &[f64]) -> Result<TestResult, AssocError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(AssocError::GroupSize { a: a.len(), b: b.len() });
    }
    Ok(match kind {
        TestKind::MannWhitney => mann_whitney(a, b),
        TestKind::WelchT => welch_t(a, b),
    })
}

/// `"<0.001"` below 0.001, otherwise three decimals.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}
