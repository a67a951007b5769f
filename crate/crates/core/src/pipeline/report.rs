use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{render_html, validate, write_atomic, SchemaError};
use crate::holter::{CardiacMetrics, RrSeries};
use crate::ingest::QcDecision;
use crate::sleepmetrics::SleepMetrics;
use crate::{Stage, EPOCH_SECONDS};

pub const SCHEMA_VERSION: &str = "1";

/// JSON schema every emitted report is checked against.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Ok,
    /// Some stages failed; see `errors`.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub arousal_epochs: Option<usize>,
    pub respiratory_epochs: Option<usize>,
    pub desaturations_3: Option<usize>,
    pub desaturations_4: Option<usize>,
    pub detected_beats: Option<usize>,
    pub pac_per_hour: Option<f64>,
    pub pvc_per_hour: Option<f64>,
    pub raw_hr_range: Option<[f64; 2]>,
    /// Mean W-class probability, when stage probabilities exist.
    pub wake_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub source: String,
    pub path: Option<String>,
    /// SHA-256 of the checkpoint or probability file.
    pub digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub package: String,
    pub version: String,
    /// Hash of the configuration without its model section.
    pub config_hash: String,
    pub input_digest: String,
    pub model: ModelProvenance,
    pub seeds: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvernightReport {
    pub schema_version: String,
    pub recording_id: String,
    pub status: ReportStatus,
    pub errors: Vec<StageFailure>,
    pub duration_s: f64,
    pub epoch_seconds: f64,
    /// First analysed epoch of the recording.
    pub epoch_offset: usize,
    pub n_epochs: usize,
    pub hypnogram: Vec<Stage>,
    /// Mean instantaneous HR of valid intervals ending in each epoch.
    pub hr_trend: Vec<Option<f64>>,
    pub qc: Option<QcDecision>,
    pub sleep_metrics: Option<SleepMetrics>,
    pub cardiac_metrics: Option<CardiacMetrics>,
    pub events: EventSummary,
    pub provenance: Provenance,
}

impl OvernightReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn fail(&mut self, stage: &str, message: impl std::fmt::Display) {
        log::error!("{}: {stage}: {message}", self.recording_id);
        self.errors.push(StageFailure { stage: stage.into(), message: message.to_string() });
        self.status = ReportStatus::Partial;
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report does not match schema: {0}")]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-epoch mean HR over `n_epochs` epochs starting at time zero.
pub fn hr_trend(rr: &RrSeries, n_epochs: usize) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; n_epochs];
    let mut count = vec![0usize; n_epochs];
    for i in 0..rr.len() {
        if !rr.is_valid(i) {
            continue;
        }
        let e = (rr.end_time(i) / EPOCH_SECONDS).floor();
        if e >= 0.0 && (e as usize) < n_epochs {
            sum[e as usize] += 60_000.0 / rr.rr_ms[i];
            count[e as usize] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect()
}

/// Validate, then write `<dir>/<id>.json` and optionally the HTML page
/// rendered from the written JSON. Returns the written paths.
pub fn write_report(report: &OvernightReport, dir: &Path, html: bool) -> Result<Vec<PathBuf>, ReportError> {
    let json = report.to_json();
    let value: serde_json::Value = serde_json::from_str(&json)?;
    let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA)?;
    validate(&schema, &value)?;
    std::fs::create_dir_all(dir)?;
    let stem = sanitize(&report.recording_id);
    let json_path = dir.join(format!("{stem}.json"));
    write_atomic(&json_path, json.as_bytes())?;
    let mut out = vec![json_path];
    if html {
        let reparsed = OvernightReport::from_json(&json)?;
        let html_path = dir.join(format!("{stem}.html"));
        write_atomic(&html_path, render_html(&reparsed).as_bytes())?;
        out.push(html_path);
    }
    Ok(out)
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}
