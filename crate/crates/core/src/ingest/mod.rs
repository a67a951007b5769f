//! Recording ingestion: EDF signals, scored-event annotations, epoch label
//! construction, boundary trimming and cohort QC.

mod annotations;
mod edf;
mod labels;
mod qc;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotations::{
    parse_annotations, AnnotatedStage, AnnotationError, ConceptMap, EventKind, ScoredEvent,
};
pub use edf::{parse_edf, CHANNEL_HEADER_LEN, GLOBAL_HEADER_LEN, parse_header, EdfChannel, EdfError, EdfFile, EdfHeader};
pub use labels::{build_epoch_labels, trim_boundaries, EpochLabels, LabelWarning, Trimmed};
pub use qc::{apply_qc, QcDecision, QcReason, QcRule};

/// Epochs dropped from each end of a recording.
pub const DEFAULT_TRIM_EPOCHS: usize = 60;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Edf(#[from] EdfError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error("no channel matches '{requested}'; available: {available:?}")]
    NoChannel {
        requested: String,
        available: Vec<String>,
    },
    #[error("recording has zero complete 30-s epochs (duration {duration} s)")]
    NoEpochs { duration: f64 },
    #[error("recording has {n_epochs} epochs; trimming {trim} at each end needs more than {}", 2 * trim)]
    TooShortToTrim { n_epochs: usize, trim: usize },
    #[error("signal epochs ({signal}) and label epochs ({labels}) differ")]
    EpochCountMismatch { signal: usize, labels: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Alias table for channel requests, e.g. `ECG -> [ECG, EKG, ECG2, ...]`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ChannelAliases {
    pub aliases: BTreeMap<String, Vec<String>>,
}

impl ChannelAliases {
    /// The shipped alias table.
    pub fn builtin() -> Self {
        Self::from_toml(include_str!("../../data/channel_aliases.toml"))
            .expect("shipped channel alias table parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))
    }

    fn candidates(&self, requested: &str) -> Vec<String> {
        let key = fold(requested);
        self.aliases
            .iter()
            .filter(|(k, _)| fold(k) == key)
            .flat_map(|(_, v)| v.iter().map(|s| fold(s)))
            .collect()
    }
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Index of the first channel whose label matches `requested` after
/// case-folding and trimming, falling back to the alias table.
pub fn select_channel(
    header: &EdfHeader,
    requested: &str,
    aliases: &ChannelAliases,
) -> Result<usize, IngestError> {
    let want = fold(requested);
    if let Some(i) = header.channels.iter().position(|c| fold(&c.label) == want) {
        return Ok(i);
    }
    let alts = aliases.candidates(requested);
    for alt in &alts {
        if let Some(i) = header.channels.iter().position(|c| &fold(&c.label) == alt) {
            return Ok(i);
        }
    }
    Err(IngestError::NoChannel {
        requested: requested.to_string(),
        available: header.labels(),
    })
}

/// A single resolved signal in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecording {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub channel_label: String,
}

impl EcgRecording {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Extract channel `index` from a decoded file, converting voltage
    /// units to millivolts.
    pub fn from_edf(file: &EdfFile, index: usize) -> Self {
        let ch = &file.header.channels[index];
        let scale = match ch.physical_dim.trim().to_lowercase().as_str() {
            "uv" | "µv" | "μv" => 1e-3,
            "v" => 1e3,
            _ => 1.0,
        };
        let samples = file
            .physical(index)
            .into_iter()
            .map(|v| v * scale)
            .collect();
        EcgRecording {
            samples,
            fs: ch.sampling_rate(file.header.record_duration),
            channel_label: ch.label.clone(),
        }
    }

    /// A channel without unit rescaling (e.g. SpO2 in percent).
    pub fn raw_channel(file: &EdfFile, index: usize) -> Self {
        let ch = &file.header.channels[index];
        EcgRecording {
            samples: file.physical(index),
            fs: ch.sampling_rate(file.header.record_duration),
            channel_label: ch.label.clone(),
        }
    }
}
