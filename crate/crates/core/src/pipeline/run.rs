use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::report::StageFailure;
use super::{
    hr_trend, sha256_hex, write_report, EventSummary, ExitCode, ModelKind, ModelProvenance, OvernightReport,
    PipelineConfig, PipelineError, Provenance, ReportStatus, SCHEMA_VERSION,
};
use crate::assoc::{wake_probability, CohortTable};
use crate::dsp::{bandpass, preprocess, segment_epochs};
use crate::features::{Extractor, FeatureVector, WelchConfig};
use crate::holter::{analyze_ecg, parse_beat_annotations, BeatAnnotations};
use crate::ingest::{
    apply_qc, build_epoch_labels, parse_annotations, select_channel, ChannelAliases, ConceptMap, EcgRecording,
    EdfFile, EpochLabels,
};
use crate::model::{build_windows, ingest_probabilities, Checkpoint, Classifier, ContextWindow, ProbabilityMatrix};
use crate::sleepmetrics::{detect_desaturations, sleep_metrics, SleepInputs};
use crate::{Stage, EPOCH_SECONDS};

/// One recording's raw inputs. Sidecar files are optional.
#[derive(Debug, Clone, Default)]
pub struct RecordingInputs {
    pub id: String,
    pub edf: Vec<u8>,
    pub annotations: Option<String>,
    pub beats: Option<String>,
    /// Per-epoch stage probabilities, used when the model source is
    /// external.
    pub probabilities: Option<Vec<u8>>,
}

fn first_existing(candidates: &[PathBuf]) -> Option<&PathBuf> {
    candidates.iter().find(|p| p.is_file())
}

impl RecordingInputs {
    /// Read `<stem>.edf` and its sidecars: `<stem>-nsrr.xml` or
    /// `<stem>.xml`, and `<stem>.beats`.
    pub fn from_edf_path(path: &Path) -> std::io::Result<Self> {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("recording").to_string();
        let dir = path.parent().unwrap_or(Path::new("."));
        let xml = first_existing(&[dir.join(format!("{stem}-nsrr.xml")), dir.join(format!("{stem}.xml"))]).cloned();
        let beats = first_existing(&[dir.join(format!("{stem}.beats"))]).cloned();
        Ok(RecordingInputs {
            edf: std::fs::read(path)?,
            annotations: xml.map(std::fs::read_to_string).transpose()?,
            beats: beats.map(std::fs::read_to_string).transpose()?,
            probabilities: None,
            id: stem,
        })
    }

    fn digest(&self) -> String {
        let mut bytes = self.edf.clone();
        for part in [&self.annotations, &self.beats] {
            bytes.push(0);
            if let Some(p) = part {
                bytes.extend_from_slice(p.as_bytes());
            }
        }
        sha256_hex(&bytes)
    }
}

/// `.edf` files under `path` (or `path` itself), sorted.
pub fn discover_recordings(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("edf")))
        .collect();
    out.sort();
    Ok(out)
}

/// A resolved model source.
#[derive(Debug, Clone)]
pub enum LoadedModel {
    Reference,
    /// A probability file, or a directory of `<id>.csv` / `<id>.prob`.
    External(PathBuf),
    Native { staging: Classifier, events: Option<Classifier>, path: PathBuf, digest: String },
}

fn load_checkpoint(path: &Path) -> Result<(Classifier, String), PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let ck: Checkpoint = serde_json::from_slice(&bytes)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let clf = Classifier::from_checkpoint(&ck).map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok((clf, sha256_hex(&bytes)))
}

/// Configuration plus everything loaded once per batch.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: PipelineConfig,
    pub aliases: ChannelAliases,
    pub concepts: ConceptMap,
    pub model: LoadedModel,
}

impl RunContext {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))
        };
        let aliases = match &config.input.aliases {
            Some(p) => ChannelAliases::from_toml(&read(p)?).map_err(|e| PipelineError::Config(e.to_string()))?,
            None => ChannelAliases::builtin(),
        };
        let concepts = match &config.input.concept_map {
            Some(p) => ConceptMap::from_toml(&read(p)?).map_err(|e| PipelineError::Config(e.to_string()))?,
            None => ConceptMap::builtin(),
        };
        let model = match config.model.source {
            ModelKind::Reference => LoadedModel::Reference,
            ModelKind::External => {
                let p = config.model.probabilities.clone().expect("validated");
                if !p.exists() {
                    return Err(PipelineError::Config(format!("probabilities {} not found", p.display())));
                }
                LoadedModel::External(p)
            }
            ModelKind::Native => {
                let path = config.model.checkpoint.clone().expect("validated");
                let (staging, digest) = load_checkpoint(&path)?;
                if staging.arch.heads != [5] {
                    return Err(PipelineError::Config(format!(
                        "staging checkpoint has heads {:?}, expected [5]",
                        staging.arch.heads
                    )));
                }
                let events = match &config.model.events_checkpoint {
                    Some(p) => Some(load_checkpoint(p)?.0),
                    None => None,
                };
                LoadedModel::Native { staging, events, path, digest }
            }
        };
        Ok(RunContext { config, aliases, concepts, model })
    }

    fn external_bytes(&self, inputs: &RecordingInputs) -> Result<(Vec<u8>, Option<String>), String> {
        if let Some(b) = &inputs.probabilities {
            return Ok((b.clone(), None));
        }
        let LoadedModel::External(p) = &self.model else { unreachable!() };
        let file = if p.is_dir() {
            first_existing(&[p.join(format!("{}.csv", inputs.id)), p.join(format!("{}.prob", inputs.id))])
                .cloned()
                .ok_or_else(|| format!("no probability file for '{}' in {}", inputs.id, p.display()))?
        } else {
            p.clone()
        };
        let bytes = std::fs::read(&file).map_err(|e| format!("{}: {e}", file.display()))?;
        Ok((bytes, Some(file.display().to_string())))
    }
}

/// Preprocess and featurise every complete epoch of a recording.
pub(crate) fn recording_features(
    ecg: &EcgRecording,
    cfg: &PipelineConfig,
) -> Result<Vec<FeatureVector>, String> {
    let x = preprocess(&ecg.samples, ecg.fs, &cfg.preprocess).map_err(|e| e.to_string())?;
    let epochs = segment_epochs(&x).map_err(|e| e.to_string())?;
    let ex = Extractor::new(&WelchConfig::default()).map_err(|e| e.to_string())?;
    ex.matrix(&epochs).map_err(|e| e.to_string())
}

fn predict(clf: &Classifier, feats: &[FeatureVector], window: usize) -> Result<Vec<ProbabilityMatrix>, String> {
    let w = ContextWindow::new(window).map_err(|e| e.to_string())?;
    let x = build_windows(feats, w).map_err(|e| e.to_string())?;
    clf.predict(&x).map_err(|e| e.to_string())
}

fn base_report(inputs: &RecordingInputs, ctx: &RunContext) -> OvernightReport {
    let cfg = &ctx.config;
    let mut hashed = cfg.clone();
    hashed.model = Default::default();
    let (source, path, digest) = match &ctx.model {
        LoadedModel::Reference => ("reference", None, None),
        LoadedModel::External(p) => ("external", Some(p.display().to_string()), None),
        LoadedModel::Native { path, digest, .. } => ("native", Some(path.display().to_string()), Some(digest.clone())),
    };
    let generated_at = cfg.report.timestamp.then(|| {
        let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default();
        chrono::DateTime::from_timestamp(now.as_secs() as i64, 0).map(|t| t.to_rfc3339()).unwrap_or_default()
    });
    OvernightReport {
        schema_version: SCHEMA_VERSION.into(),
        recording_id: inputs.id.clone(),
        status: ReportStatus::Ok,
        errors: Vec::new(),
        duration_s: 0.0,
        epoch_seconds: EPOCH_SECONDS,
        epoch_offset: 0,
        n_epochs: 0,
        hypnogram: Vec::new(),
        hr_trend: Vec::new(),
        qc: None,
        sleep_metrics: None,
        cardiac_metrics: None,
        events: EventSummary::default(),
        provenance: Provenance {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: hashed.hash(),
            input_digest: inputs.digest(),
            model: ModelProvenance { source: source.into(), path, digest },
            seeds: BTreeMap::from([("eval".to_string(), cfg.eval.seed), ("train".to_string(), cfg.train.seed)]),
            generated_at,
        },
    }
}

fn fatal(mut r: OvernightReport, stage: &str, msg: impl std::fmt::Display) -> OvernightReport {
    r.fail(stage, msg);
    r.status = ReportStatus::Failed;
    r
}

/// Run one recording end to end. Failures are recorded in the report
/// rather than returned.
pub fn run_recording(inputs: &RecordingInputs, ctx: &RunContext) -> OvernightReport {
    let cfg = &ctx.config;
    let mut report = base_report(inputs, ctx);

    let edf: EdfFile = match crate::ingest::parse_edf(&inputs.edf) {
        Ok(f) => f,
        Err(e) => return fatal(report, "ingest", e),
    };
    let ecg_idx = match select_channel(&edf.header, &cfg.input.channel, &ctx.aliases) {
        Ok(i) => i,
        Err(e) => return fatal(report, "ingest", e),
    };
    let ecg = EcgRecording::from_edf(&edf, ecg_idx);
    let duration = edf.header.duration_seconds();
    report.duration_s = duration;
    let n_full = (duration / EPOCH_SECONDS).floor() as usize;
    let trim = cfg.input.trim_epochs;
    if n_full <= 2 * trim {
        return fatal(
            report,
            "ingest",
            crate::ingest::IngestError::TooShortToTrim { n_epochs: n_full, trim },
        );
    }
    let keep = trim..n_full - trim;
    let n = keep.len();
    let (t0, t1) = (keep.start as f64 * EPOCH_SECONDS, keep.end as f64 * EPOCH_SECONDS);
    report.epoch_offset = trim;
    report.n_epochs = n;

    let labels: Option<EpochLabels> = inputs.annotations.as_deref().and_then(|doc| {
        match parse_annotations(doc, &ctx.concepts)
            .map_err(crate::ingest::IngestError::from)
            .and_then(|ev| build_epoch_labels(&ev, duration))
        {
            Ok((l, _warnings)) => Some(l),
            Err(e) => {
                report.fail("annotations", e);
                None
            }
        }
    });
    report.qc = labels.as_ref().map(|l| apply_qc(duration, l, &cfg.input.qc));

    let mut stages: Option<Vec<Stage>> = None;
    let mut arousal: Option<Vec<u8>> = None;
    let mut respiratory: Option<Vec<u8>> = None;
    let mut stage_probs: Option<ProbabilityMatrix> = None;
    match &ctx.model {
        LoadedModel::Reference => match &labels {
            Some(l) => stages = Some(l.stage[keep.clone()].to_vec()),
            None => report.fail("staging", "reference staging needs an annotation document"),
        },
        LoadedModel::External(_) => {
            let parsed = ctx.external_bytes(inputs).and_then(|(bytes, path)| {
                if let Some(p) = path {
                    report.provenance.model.path = Some(p);
                }
                report.provenance.model.digest = Some(sha256_hex(&bytes));
                ingest_probabilities(&bytes, None).map_err(|e| e.to_string())
            });
            match parsed {
                Ok(p) if p.n_classes() != 5 => {
                    report.fail("staging", format!("expected 5 classes, got {}", p.n_classes()))
                }
                Ok(p) if p.n_rows() == n => stage_probs = Some(p),
                Ok(p) if p.n_rows() == n_full => {
                    let data = p.as_slice()[keep.start * 5..keep.end * 5].to_vec();
                    stage_probs = Some(ProbabilityMatrix::new(5, data).expect("rows already validated"));
                }
                Ok(p) => report.fail(
                    "staging",
                    format!("{} probability rows for {n} analysed epochs ({n_full} in the recording)", p.n_rows()),
                ),
                Err(e) => report.fail("staging", e),
            }
        }
        LoadedModel::Native { staging, events, .. } => {
            let feats = recording_features(&ecg, cfg).and_then(|f| {
                if f.len() < keep.end {
                    Err(format!("{} feature epochs, expected {n_full}", f.len()))
                } else {
                    Ok(f[keep.clone()].to_vec())
                }
            });
            match feats {
                Ok(f) => {
                    match predict(staging, &f, cfg.model.window) {
                        Ok(mut p) => stage_probs = Some(p.remove(0)),
                        Err(e) => report.fail("staging", e),
                    }
                    if let Some(ev) = events {
                        match predict(ev, &f, cfg.model.window) {
                            Ok(p) if p.len() == 2 => {
                                let bin = |m: &ProbabilityMatrix| m.argmax().iter().map(|&c| c as u8).collect();
                                arousal = Some(bin(&p[0]));
                                respiratory = Some(bin(&p[1]));
                            }
                            Ok(p) => report.fail("events", format!("events model has {} heads, expected 2", p.len())),
                            Err(e) => report.fail("events", e),
                        }
                    }
                }
                Err(e) => report.fail("features", e),
            }
        }
    }
    if let Some(p) = &stage_probs {
        stages = Some(p.argmax().into_iter().map(|c| Stage::from_index(c).expect("5 classes")).collect());
        report.events.wake_probability = wake_probability(p).ok();
    }
    if let Some(l) = &labels {
        arousal.get_or_insert_with(|| l.arousal[keep.clone()].to_vec());
        respiratory.get_or_insert_with(|| l.respiratory[keep.clone()].to_vec());
    }
    report.events.arousal_epochs = arousal.as_ref().map(|a| a.iter().filter(|v| **v > 0).count());
    report.events.respiratory_epochs = respiratory.as_ref().map(|a| a.iter().filter(|v| **v > 0).count());

    let spo2: Option<EcgRecording> = match select_channel(&edf.header, &cfg.input.spo2_channel, &ctx.aliases) {
        Ok(i) => {
            let ch = EcgRecording::raw_channel(&edf, i);
            let (a, b) = ((t0 * ch.fs).round() as usize, ((t1 * ch.fs).round() as usize).min(ch.samples.len()));
            Some(EcgRecording { samples: ch.samples[a.min(b)..b].to_vec(), ..ch })
        }
        Err(_) => {
            log::info!("{}: no SpO2 channel; ODI omitted", inputs.id);
            None
        }
    };
    if let Some(s) = &spo2 {
        for (depth, slot) in [(3.0, &mut report.events.desaturations_3), (4.0, &mut report.events.desaturations_4)] {
            *slot = detect_desaturations(&s.samples, s.fs, depth, &cfg.odi).ok().map(|e| e.len());
        }
    }

    if let Some(st) = &stages {
        report.hypnogram = st.clone();
        let empty: Vec<u8> = vec![0; st.len()];
        let inputs_sm = SleepInputs {
            stages: st,
            arousal: arousal.as_deref().unwrap_or(&empty),
            respiratory: respiratory.as_deref().unwrap_or(&empty),
            spo2: spo2.as_ref().map(|s| (s.samples.as_slice(), s.fs)),
        };
        match sleep_metrics(&inputs_sm, &cfg.odi) {
            Ok(mut m) => {
                if arousal.is_none() {
                    m.ari = None;
                }
                if respiratory.is_none() {
                    m.ahi = None;
                }
                report.sleep_metrics = Some(m);
            }
            Err(e) => report.fail("sleep_metrics", e),
        }
    }

    // Holter analysis on the same window, at the native rate.
    report.hr_trend = vec![None; n];
    let fs = ecg.fs;
    let (s0, s1) = ((t0 * fs).round() as usize, ((t1 * fs).round() as usize).min(ecg.samples.len()));
    let ann: Option<BeatAnnotations> = inputs.beats.as_deref().and_then(|text| {
        match parse_beat_annotations(text).and_then(|a| a.validate(Some(duration)).map(|_| a)) {
            Ok(a) => Some(a.window(t0, t1)),
            Err(e) => {
                report.fail("beat_annotations", e);
                None
            }
        }
    });
    let [low, high] = cfg.preprocess.band;
    match bandpass(&ecg.samples[s0..s1], low, high.min(0.45 * fs), cfg.preprocess.filter_order, fs) {
        Ok(x) => match analyze_ecg(&x, fs, ann.as_ref(), &cfg.holter) {
            Ok((rr, cm)) => {
                report.hr_trend = hr_trend(&rr, n);
                report.events.detected_beats = Some(rr.beat_times.len());
                if let Some((pac, pvc)) = cm.burden {
                    report.events.pac_per_hour = Some(pac);
                    report.events.pvc_per_hour = Some(pvc);
                }
                report.events.raw_hr_range = cm.raw_hr_range.map(|(a, b)| [a, b]);
                report.cardiac_metrics = Some(cm);
            }
            Err(e) => report.fail("holter", e),
        },
        Err(e) => report.fail("holter", e),
    }

    if report.sleep_metrics.is_none() && report.cardiac_metrics.is_none() {
        report.status = ReportStatus::Failed;
    }
    report
}

/// Outcome of a batch run.
#[derive(Debug, Clone, Default)]
pub struct BatchSummary {
    pub written: Vec<PathBuf>,
    pub failures: Vec<(String, String)>,
    /// One row per recording with every metric key.
    pub cohort: CohortTable,
}

impl BatchSummary {
    pub fn exit_code(&self) -> ExitCode {
        if self.failures.is_empty() {
            ExitCode::Success
        } else {
            ExitCode::Partial
        }
    }
}

fn cohort_row(r: &OvernightReport) -> BTreeMap<String, Option<f64>> {
    let mut row = BTreeMap::new();
    if let Some(m) = &r.sleep_metrics {
        row.extend(m.entries().iter().map(|(k, v)| (k.to_string(), *v)));
    }
    if let Some(c) = &r.cardiac_metrics {
        row.extend(c.entries().map(|(k, v)| (k.to_string(), v)));
    }
    row.insert("PAC_per_hour".into(), r.events.pac_per_hour);
    row.insert("PVC_per_hour".into(), r.events.pvc_per_hour);
    row.insert("wake_probability".into(), r.events.wake_probability);
    row
}

/// Run and write every recording, `workers` at a time.
pub fn run_batch(paths: &[PathBuf], ctx: &RunContext, out_dir: &Path) -> BatchSummary {
    let one = |p: &PathBuf| -> Result<(OvernightReport, Vec<PathBuf>), (String, String)> {
        let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or("?").to_string();
        let inputs = RecordingInputs::from_edf_path(p).map_err(|e| (id.clone(), e.to_string()))?;
        let report = run_recording(&inputs, ctx);
        let written =
            write_report(&report, out_dir, ctx.config.report.html).map_err(|e| (id.clone(), e.to_string()))?;
        Ok((report, written))
    };
    let results: Vec<_> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let workers = ctx.config.workers;
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
            pool.install(|| paths.par_iter().map(one).collect())
        }
        #[cfg(not(feature = "parallel"))]
        {
            paths.iter().map(one).collect()
        }
    };
    let mut summary = BatchSummary::default();
    for r in results {
        match r {
            Ok((report, written)) => {
                if report.status != ReportStatus::Ok {
                    let msg = report.errors.iter().map(StageFailure::to_string).collect::<Vec<_>>().join("; ");
                    summary.failures.push((report.recording_id.clone(), msg));
                }
                summary.cohort.push_row(&report.recording_id, &cohort_row(&report));
                summary.written.extend(written);
            }
            Err(f) => summary.failures.push(f),
        }
    }
    summary
}

impl std::fmt::Display for StageFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}
