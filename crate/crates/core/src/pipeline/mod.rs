//! Configuration, end-to-end orchestration and report emission.

mod cache;
mod config;
mod html;
mod report;
mod run;
mod schema;
mod workflows;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use cache::{cmd_ingest, load_cached, CacheEntry, IngestSummary, RecordingFailure};
pub use config::{
    AssocConfig, EvalConfig, InputConfig, ModelConfig, ModelKind, PipelineConfig, ReportConfig, ENV_PREFIX,
};
pub use html::render_html;
pub use report::{
    hr_trend, write_report, EventSummary, ModelProvenance, OvernightReport, Provenance, ReportError, ReportStatus, StageFailure,
    REPORT_SCHEMA, SCHEMA_VERSION,
};
pub use run::{discover_recordings, run_batch, run_recording, BatchSummary, LoadedModel, RecordingInputs, RunContext};
pub use schema::{validate, SchemaError};
pub use workflows::{
    associate, default_schemes, evaluate_predictions, train_from_cache, AssociationReport, EvaluationReport,
    GranularityResult, PsqiRecord, SkippedScheme, TrainedModels,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    /// Some recordings failed; the rest were processed.
    Partial = 1,
    /// Invalid configuration; nothing was processed.
    Config = 2,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Write to a sibling temp file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
