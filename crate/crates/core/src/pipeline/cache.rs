//! `ingest`: decode, label, QC, featurise and cache each recording.
//!
//! Cache layout per recording: `<id>.json` ([`CacheEntry`]) and
//! `<id>.feat` (binary feature matrix of the trimmed epochs). An entry is
//! reused when its key, a digest of the inputs and the relevant config
//! sections, still matches.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{recording_features, RunContext};
use super::{sha256_hex, write_atomic, PipelineError};
use crate::features::{read_feature_cache, write_feature_cache, FeatureVector};
use crate::ingest::{
    apply_qc, build_epoch_labels, parse_annotations, parse_edf, select_channel, trim_boundaries, EcgRecording,
    EpochLabels, QcDecision,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub id: String,
    pub key: String,
    pub source: String,
    pub duration_s: f64,
    pub fs: f64,
    pub channel_label: String,
    pub qc: QcDecision,
    /// Labels after boundary trimming.
    pub labels: EpochLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingFailure {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub total: usize,
    /// Newly written entries.
    pub cached: Vec<String>,
    /// Entries reused unchanged.
    pub cache_hits: Vec<String>,
    /// Excluded ids by QC reason.
    pub excluded: BTreeMap<String, Vec<String>>,
    pub failures: Vec<RecordingFailure>,
}

impl IngestSummary {
    pub fn exclusion_counts(&self) -> BTreeMap<String, usize> {
        self.excluded.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    /// Ids available for training and evaluation.
    pub fn included(&self) -> Vec<String> {
        let mut v: Vec<String> = self.cached.iter().chain(&self.cache_hits).cloned().collect();
        v.sort();
        v
    }
}

enum Outcome {
    Cached(String),
    Hit(String),
    Excluded(String, QcDecision),
}

fn cache_key(edf: &[u8], xml: &str, ctx: &RunContext) -> String {
    let mut bytes = edf.to_vec();
    bytes.push(0);
    bytes.extend_from_slice(xml.as_bytes());
    bytes.push(0);
    bytes.extend(serde_json::to_vec(&ctx.config.input).expect("serialises"));
    bytes.extend(serde_json::to_vec(&ctx.config.preprocess).expect("serialises"));
    sha256_hex(&bytes)
}

fn ingest_one(path: &Path, ctx: &RunContext, dir: &Path) -> Result<Outcome, String> {
    let id = path.file_stem().and_then(|s| s.to_str()).ok_or("unnamed file")?.to_string();
    let edf_bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    let parent = path.parent().unwrap_or(Path::new("."));
    let xml_path = [parent.join(format!("{id}-nsrr.xml")), parent.join(format!("{id}.xml"))]
        .into_iter()
        .find(|p| p.is_file())
        .ok_or("no annotation document next to the EDF")?;
    let xml = std::fs::read_to_string(&xml_path).map_err(|e| e.to_string())?;
    let key = cache_key(&edf_bytes, &xml, ctx);

    let json_path = dir.join(format!("{id}.json"));
    let feat_path = dir.join(format!("{id}.feat"));
    if let Ok(text) = std::fs::read_to_string(&json_path) {
        if let Ok(entry) = serde_json::from_str::<CacheEntry>(&text) {
            if entry.key == key && feat_path.is_file() {
                return Ok(Outcome::Hit(id));
            }
        }
    }

    let edf = parse_edf(&edf_bytes).map_err(|e| e.to_string())?;
    let idx = select_channel(&edf.header, &ctx.config.input.channel, &ctx.aliases).map_err(|e| e.to_string())?;
    let ecg = EcgRecording::from_edf(&edf, idx);
    let duration = edf.header.duration_seconds();
    let events = parse_annotations(&xml, &ctx.concepts).map_err(|e| e.to_string())?;
    let (labels, _) = build_epoch_labels(&events, duration).map_err(|e| e.to_string())?;
    let qc = apply_qc(duration, &labels, &ctx.config.input.qc);
    if !qc.included {
        return Ok(Outcome::Excluded(id, qc));
    }
    let mut feats = recording_features(&ecg, &ctx.config)?;
    feats.truncate(labels.n_epochs);
    if feats.len() != labels.n_epochs {
        return Err(format!("{} feature epochs for {} label epochs", feats.len(), labels.n_epochs));
    }
    let trimmed = trim_boundaries(labels, feats, ctx.config.input.trim_epochs).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_feature_cache(&mut buf, &trimmed.epochs).map_err(|e| e.to_string())?;
    write_atomic(&feat_path, &buf).map_err(|e| e.to_string())?;
    let entry = CacheEntry {
        id: id.clone(),
        key,
        source: path.display().to_string(),
        duration_s: duration,
        fs: ecg.fs,
        channel_label: ecg.channel_label,
        qc,
        labels: trimmed.labels,
    };
    let json = serde_json::to_string_pretty(&entry).expect("serialises");
    write_atomic(&json_path, json.as_bytes()).map_err(|e| e.to_string())?;
    Ok(Outcome::Cached(id))
}

/// Ingest every path into `cache_dir` and write `qc_summary.json`.
/// Undecodable recordings are listed in the summary; the rest continue.
pub fn cmd_ingest(paths: &[PathBuf], ctx: &RunContext, cache_dir: &Path) -> Result<IngestSummary, PipelineError> {
    std::fs::create_dir_all(cache_dir)?;
    if paths.is_empty() {
        log::warn!("no recordings to ingest");
    }
    let results: Vec<Result<Outcome, String>> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(ctx.config.workers).build().expect("thread pool");
            pool.install(|| paths.par_iter().map(|p| ingest_one(p, ctx, cache_dir)).collect())
        }
        #[cfg(not(feature = "parallel"))]
        {
            paths.iter().map(|p| ingest_one(p, ctx, cache_dir)).collect()
        }
    };
    let mut summary = IngestSummary { total: paths.len(), ..Default::default() };
    for (path, r) in paths.iter().zip(results) {
        match r {
            Ok(Outcome::Cached(id)) => summary.cached.push(id),
            Ok(Outcome::Hit(id)) => summary.cache_hits.push(id),
            Ok(Outcome::Excluded(id, qc)) => {
                for reason in qc.reasons {
                    let name = serde_json::to_value(reason).unwrap().as_str().unwrap().to_string();
                    summary.excluded.entry(name).or_default().push(id.clone());
                }
            }
            Err(reason) => {
                log::warn!("{}: {reason}", path.display());
                summary.failures.push(RecordingFailure { path: path.display().to_string(), reason });
            }
        }
    }
    let json = serde_json::to_string_pretty(&summary).expect("serialises");
    write_atomic(&cache_dir.join("qc_summary.json"), json.as_bytes())?;
    Ok(summary)
}

/// Read one cached recording.
pub fn load_cached(cache_dir: &Path, id: &str) -> Result<(CacheEntry, Vec<FeatureVector>), PipelineError> {
    let text = std::fs::read_to_string(cache_dir.join(format!("{id}.json")))
        .map_err(|e| PipelineError::Input(format!("cache entry '{id}': {e}")))?;
    let entry: CacheEntry =
        serde_json::from_str(&text).map_err(|e| PipelineError::Input(format!("cache entry '{id}': {e}")))?;
    let f = std::fs::File::open(cache_dir.join(format!("{id}.feat")))
        .map_err(|e| PipelineError::Input(format!("features '{id}': {e}")))?;
    let feats =
        read_feature_cache(std::io::BufReader::new(f)).map_err(|e| PipelineError::Input(format!("{id}: {e}")))?;
    if feats.len() != entry.labels.n_epochs {
        return Err(PipelineError::Input(format!(
            "{id}: {} feature rows for {} labelled epochs",
            feats.len(),
            entry.labels.n_epochs
        )));
    }
    Ok((entry, feats))
}
