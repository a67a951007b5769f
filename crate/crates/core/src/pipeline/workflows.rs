//! Cohort-level commands: training from the feature cache, evaluation of
//! stage predictions and group association analysis.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_cached, AssocConfig, PipelineConfig, PipelineError};
use crate::assoc::{
    compare_cohort, pearson_regression, psqi_normalize, CohortTable, ComparisonTable, ConsistencyResult,
    StratificationScheme, SLEEP_COMPARISON_ROWS,
};
use crate::eval::{bootstrap_staging, staging_metrics, MetricEstimate, StagingMetrics};
use crate::model::{
    build_windows, collapse_classes, collapse_labels, train, Architecture, Classifier, ContextWindow, Dataset,
    Granularity, ProbabilityMatrix, TrainReport, Windows,
};
use crate::Stage;

fn model_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Input(e.to_string())
}

struct Stacked {
    x: Windows,
    stage: Vec<usize>,
    arousal: Vec<usize>,
    respiratory: Vec<usize>,
}

/// Context windows are built per recording so they never straddle two nights.
fn stack(cache_dir: &Path, ids: &[String], window: usize) -> Result<Stacked, PipelineError> {
    let ctx = ContextWindow::new(window).map_err(model_err)?;
    let mut out = Stacked { x: Windows { dim: 0, data: Vec::new() }, stage: vec![], arousal: vec![], respiratory: vec![] };
    for id in ids {
        let (entry, feats) = load_cached(cache_dir, id)?;
        let w = build_windows(&feats, ctx).map_err(model_err)?;
        if out.x.dim == 0 {
            out.x.dim = w.dim;
        }
        out.x.data.extend_from_slice(&w.data);
        out.stage.extend(entry.labels.stage.iter().map(|s| s.index()));
        out.arousal.extend(entry.labels.arousal.iter().map(|&v| (v > 0) as usize));
        out.respiratory.extend(entry.labels.respiratory.iter().map(|&v| (v > 0) as usize));
    }
    if out.stage.is_empty() {
        return Err(PipelineError::Input("no cached epochs for the requested recordings".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub staging: Classifier,
    pub staging_report: TrainReport,
    pub events: Option<(Classifier, TrainReport)>,
}

/// Train the staging network, and the two-head events network when
/// `with_events` is set, on cached recordings. Normalisation statistics
/// come from the training windows only.
pub fn train_from_cache(
    cache_dir: &Path,
    train_ids: &[String],
    val_ids: &[String],
    cfg: &PipelineConfig,
    with_events: bool,
) -> Result<TrainedModels, PipelineError> {
    let tr = stack(cache_dir, train_ids, cfg.model.window)?;
    let va = if val_ids.is_empty() { None } else { Some(stack(cache_dir, val_ids, cfg.model.window)?) };

    let mut clf = Classifier::new(Architecture::staging(tr.x.dim), cfg.train.seed).map_err(model_err)?;
    clf.fit_normalization(&tr.x);
    let train_set = Dataset { x: &tr.x, labels: vec![&tr.stage] };
    let val_set = va.as_ref().map(|v| Dataset { x: &v.x, labels: vec![&v.stage] });
    let (staging, staging_report) = train(clf, &train_set, val_set.as_ref(), &cfg.train).map_err(model_err)?;

    let events = if with_events {
        let mut clf = Classifier::new(Architecture::events(tr.x.dim), cfg.train.seed.wrapping_add(1)).map_err(model_err)?;
        clf.fit_normalization(&tr.x);
        let train_set = Dataset { x: &tr.x, labels: vec![&tr.arousal, &tr.respiratory] };
        let val_set = va.as_ref().map(|v| Dataset { x: &v.x, labels: vec![&v.arousal, &v.respiratory] });
        Some(train(clf, &train_set, val_set.as_ref(), &cfg.train).map_err(model_err)?)
    } else {
        None
    };
    Ok(TrainedModels { staging, staging_report, events })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularityResult {
    pub granularity: Granularity,
    pub metrics: StagingMetrics,
    pub bootstrap: BTreeMap<String, MetricEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n_epochs: usize,
    pub results: Vec<GranularityResult>,
}

/// Score five-class probabilities against reference stages at every
/// granularity. Predictions at coarser granularities are the argmax of
/// the summed class probabilities.
pub fn evaluate_predictions(
    truth: &[Stage],
    probs: &ProbabilityMatrix,
    bootstrap_b: usize,
    seed: u64,
) -> Result<EvaluationReport, PipelineError> {
    if probs.n_rows() != truth.len() {
        return Err(PipelineError::Input(format!(
            "{} probability rows for {} labelled epochs",
            probs.n_rows(),
            truth.len()
        )));
    }
    let mut results = Vec::with_capacity(Granularity::ALL.len());
    for g in Granularity::ALL {
        let p = collapse_classes(probs, g).map_err(model_err)?;
        let t = collapse_labels(truth, g);
        let pred = p.argmax();
        let k = g.n_classes();
        let metrics = staging_metrics(&t, &pred, Some(&p), k).map_err(model_err)?;
        let bootstrap = if bootstrap_b > 0 {
            bootstrap_staging(&t, &pred, Some(&p), k, bootstrap_b, seed).map_err(model_err)?
        } else {
            BTreeMap::new()
        };
        results.push(GranularityResult { granularity: g, metrics, bootstrap });
    }
    Ok(EvaluationReport { n_epochs: truth.len(), results })
}

/// Subjective sleep quality next to the model's overnight summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsqiRecord {
    pub id: String,
    pub psqi: u32,
    pub wake_probability: f64,
    /// Percentage of epochs predicted as sleep.
    pub sleep_efficiency: f64,
}

impl PsqiRecord {
    /// Join PSQI scores (column `psqi_column` of `scores`) with the cohort
    /// table's `wake_probability` and `SE` columns by recording id.
    pub fn join(cohort: &CohortTable, scores: &CohortTable, psqi_column: &str) -> Result<Vec<Self>, PipelineError> {
        let psqi = scores.column(psqi_column).map_err(model_err)?;
        let wake = cohort.column("wake_probability").map_err(model_err)?;
        let se = cohort.column("SE").map_err(model_err)?;
        let mut out = Vec::new();
        for (i, id) in scores.ids.iter().enumerate() {
            let Some(j) = cohort.ids.iter().position(|c| c == id) else { continue };
            let (Some(p), Some(w), Some(s)) = (psqi[i], wake[j], se[j]) else { continue };
            if p < 0.0 || p.fract() != 0.0 {
                return Err(PipelineError::Input(format!("{id}: PSQI score {p} is not a whole number")));
            }
            out.push(PsqiRecord { id: id.clone(), psqi: p as u32, wake_probability: w, sleep_efficiency: s });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedScheme {
    pub scheme: StratificationScheme,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationReport {
    pub tables: Vec<ComparisonTable>,
    pub skipped: Vec<SkippedScheme>,
    pub consistency: Vec<ConsistencyResult>,
}

impl AssociationReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            out.push_str(&format!("# {} ({})\n", t.scheme.variable, t.test));
            out.push_str(&t.render_text());
            out.push('\n');
        }
        for s in &self.skipped {
            out.push_str(&format!("# {} skipped: {}\n", s.scheme.variable, s.reason));
        }
        for c in &self.consistency {
            out.push_str(&format!(
                "{} vs normalised PSQI: n={} r={:.3} p={:.4} y = {:.4} x + {:.4}\n",
                c.metric, c.n, c.r, c.p, c.slope, c.intercept
            ));
        }
        out
    }
}

/// Frequent-PVC and frequent-PAC schemes at the configured cut-offs.
pub fn default_schemes(cfg: &AssocConfig) -> Vec<StratificationScheme> {
    vec![
        StratificationScheme::frequent_pvc().with_threshold(cfg.frequent_pvc_per_hour),
        StratificationScheme::frequent_pac().with_threshold(cfg.frequent_pac_per_hour),
    ]
}

/// Compare the sleep metrics across every scheme and, given PSQI records,
/// regress wake probability and sleep efficiency on normalised PSQI.
pub fn associate(
    cohort: &CohortTable,
    schemes: &[StratificationScheme],
    cfg: &AssocConfig,
    psqi: &[PsqiRecord],
) -> Result<AssociationReport, PipelineError> {
    let metrics: Vec<&str> = SLEEP_COMPARISON_ROWS.iter().map(|(k, _)| *k).collect();
    let mut report = AssociationReport { tables: vec![], skipped: vec![], consistency: vec![] };
    for s in schemes {
        s.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        match compare_cohort(cohort, s, &metrics, cfg.test) {
            Ok(t) => report.tables.push(t),
            Err(e) => {
                log::warn!("scheme on {}: {e}", s.variable);
                report.skipped.push(SkippedScheme { scheme: s.clone(), reason: e.to_string() });
            }
        }
    }
    if !psqi.is_empty() {
        let x: Vec<f64> = psqi.iter().map(|r| psqi_normalize(r.psqi)).collect::<Result<_, _>>().map_err(model_err)?;
        let wake: Vec<f64> = psqi.iter().map(|r| r.wake_probability).collect();
        let se: Vec<f64> = psqi.iter().map(|r| r.sleep_efficiency).collect();
        for (name, y) in [("wake_probability", wake), ("SE", se)] {
            report.consistency.push(pearson_regression(name, &x, &y).map_err(model_err)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProbabilityMatrix;

    #[test]
    fn perfect_predictions_score_one() {
        let truth: Vec<Stage> = (0..50).map(|i| Stage::from_index(i % 5).unwrap()).collect();
        let mut data = vec![0.0; 250];
        for (i, s) in truth.iter().enumerate() {
            data[i * 5 + s.index()] = 1.0;
        }
        let p = ProbabilityMatrix::new(5, data).unwrap();
        let r = evaluate_predictions(&truth, &p, 20, 1).unwrap();
        assert_eq!(r.results.len(), 4);
        for g in &r.results {
            assert_eq!(g.metrics.accuracy, 1.0);
            assert_eq!(g.metrics.confusion.k(), g.granularity.n_classes());
            assert_eq!(g.bootstrap["accuracy"].ci_low, 1.0);
        }
    }

    #[test]
    fn psqi_join_and_regression() {
        let mut cohort = CohortTable::default();
        let mut scores = CohortTable::default();
        for i in 0..6u32 {
            let id = format!("r{i}");
            let w = 0.1 + 0.02 * i as f64;
            let row = BTreeMap::from([
                ("wake_probability".to_string(), Some(w)),
                ("SE".to_string(), Some(100.0 * (1.0 - w))),
            ]);
            cohort.push_row(&id, &row);
            scores.push_row(&id, &BTreeMap::from([("psqi".to_string(), Some((3 * i) as f64))]));
        }
        let recs = PsqiRecord::join(&cohort, &scores, "psqi").unwrap();
        assert_eq!(recs.len(), 6);
        let rep = associate(&cohort, &[], &AssocConfig::default(), &recs).unwrap();
        let wake = &rep.consistency[0];
        assert!((wake.r - 1.0).abs() < 1e-12);
        // w = 0.1 + 0.02 i and x = 3 i / 21, so the slope is 0.14.
        assert!((wake.slope - 0.14).abs() < 1e-12);
        assert!((rep.consistency[1].r + 1.0).abs() < 1e-12);
    }
}
