use serde::{Deserialize, Serialize};

use super::EpochLabels;
use crate::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcReason {
    DurationOutOfRange,
    AbnormalStageDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcDecision {
    pub included: bool,
    pub reasons: Vec<QcReason>,
}

/// Cohort inclusion rule. Stage fractions are of all (pre-trim) epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QcRule {
    pub min_hours: f64,
    pub max_hours: f64,
    /// Stages that must occupy a nonzero fraction of the recording.
    pub required_stages: Vec<Stage>,
    pub max_wake_fraction: f64,
}

impl Default for QcRule {
    fn default() -> Self {
        QcRule {
            min_hours: 7.0,
            max_hours: 14.0,
            required_stages: vec![Stage::N2, Stage::Rem],
            max_wake_fraction: 0.95,
        }
    }
}

pub fn apply_qc(duration_seconds: f64, labels: &EpochLabels, rule: &QcRule) -> QcDecision {
    let mut reasons = Vec::new();
    let hours = duration_seconds / 3600.0;
    if hours < rule.min_hours || hours > rule.max_hours {
        reasons.push(QcReason::DurationOutOfRange);
    }
    let fractions = labels.stage_fractions();
    let missing_stage = rule
        .required_stages
        .iter()
        .any(|s| fractions[s.index()] == 0.0);
    if missing_stage || fractions[Stage::W.index()] > rule.max_wake_fraction {
        reasons.push(QcReason::AbnormalStageDistribution);
    }
    QcDecision {
        included: reasons.is_empty(),
        reasons,
    }
}
