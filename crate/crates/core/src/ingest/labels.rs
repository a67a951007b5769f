use serde::{Deserialize, Serialize};

use super::{EventKind, IngestError, ScoredEvent};
use crate::{Stage, EPOCH_SECONDS};

/// Aligned per-epoch stage, arousal and respiratory sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLabels {
    pub n_epochs: usize,
    pub stage: Vec<Stage>,
    pub arousal: Vec<u8>,
    pub respiratory: Vec<u8>,
    pub trimmed: bool,
}

impl EpochLabels {
    /// Fraction of epochs in each stage, indexed by [`Stage::index`].
    pub fn stage_fractions(&self) -> [f64; 5] {
        let mut counts = [0usize; 5];
        for s in &self.stage {
            counts[s.index()] += 1;
        }
        let n = self.n_epochs.max(1) as f64;
        counts.map(|c| c as f64 / n)
    }
}

/// Two stage events disagree on an epoch; the later-starting one was kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelWarning {
    pub epoch: usize,
    pub kept: Stage,
    pub dropped: Stage,
}

/// Epoch range `[first, last)` touched by the half-open interval
/// `[start, start + duration)`. Zero-length events mark the epoch
/// containing `start`.
fn epoch_span(start: f64, duration: f64, n_epochs: usize) -> std::ops::Range<usize> {
    let first = (start / EPOCH_SECONDS).floor() as usize;
    let last = if duration > 0.0 {
        ((start + duration) / EPOCH_SECONDS).ceil() as usize
    } else {
        first + 1
    };
    first.min(n_epochs)..last.min(n_epochs)
}

/// Build the three label sequences for a recording of `duration` seconds.
///
/// Epochs without a stage annotation default to W.
pub fn build_epoch_labels(
    events: &[ScoredEvent],
    duration: f64,
) -> Result<(EpochLabels, Vec<LabelWarning>), IngestError> {
    let n_epochs = (duration / EPOCH_SECONDS).floor() as usize;
    if n_epochs == 0 {
        return Err(IngestError::NoEpochs { duration });
    }
    let mut stage: Vec<Option<(Stage, usize)>> = vec![None; n_epochs];
    let mut arousal = vec![0u8; n_epochs];
    let mut respiratory = vec![0u8; n_epochs];
    let mut warnings = Vec::new();

    let mut stage_events: Vec<(usize, &ScoredEvent)> = events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == EventKind::Stage && e.stage.is_some())
        .collect();
    stage_events.sort_by(|a, b| a.1.start.total_cmp(&b.1.start).then(a.0.cmp(&b.0)));
    for (id, ev) in stage_events {
        let s = ev.stage.map(|s| s.merged()).unwrap_or(Stage::W);
        for i in epoch_span(ev.start, ev.duration, n_epochs) {
            if let Some((prev, prev_id)) = stage[i] {
                if prev != s && prev_id != id {
                    log::warn!("epoch {i}: stage {prev} superseded by later event {s}");
                    warnings.push(LabelWarning {
                        epoch: i,
                        kept: s,
                        dropped: prev,
                    });
                }
            }
            stage[i] = Some((s, id));
        }
    }

    for ev in events {
        let target = match ev.kind {
            EventKind::Arousal => &mut arousal,
            k if k.is_respiratory() => &mut respiratory,
            _ => continue,
        };
        for i in epoch_span(ev.start, ev.duration, n_epochs) {
            target[i] = 1;
        }
    }

    Ok((
        EpochLabels {
            n_epochs,
            stage: stage
                .into_iter()
                .map(|s| s.map(|(s, _)| s).unwrap_or(Stage::W))
                .collect(),
            arousal,
            respiratory,
            trimmed: false,
        },
        warnings,
    ))
}

/// Labels and signal epochs after boundary trimming.
#[derive(Debug, Clone)]
pub struct Trimmed<T> {
    pub labels: EpochLabels,
    pub epochs: Vec<T>,
}

/// Drop `trim` epochs from both ends of the labels and the matching signal
/// epochs.
pub fn trim_boundaries<T>(
    labels: EpochLabels,
    epochs: Vec<T>,
    trim: usize,
) -> Result<Trimmed<T>, IngestError> {
    if labels.n_epochs != epochs.len() {
        return Err(IngestError::EpochCountMismatch {
            signal: epochs.len(),
            labels: labels.n_epochs,
        });
    }
    if labels.n_epochs <= 2 * trim {
        return Err(IngestError::TooShortToTrim {
            n_epochs: labels.n_epochs,
            trim,
        });
    }
    let keep = trim..labels.n_epochs - trim;
    let epochs: Vec<T> = epochs
        .into_iter()
        .skip(trim)
        .take(keep.len())
        .collect();
    Ok(Trimmed {
        labels: EpochLabels {
            n_epochs: keep.len(),
            stage: labels.stage[keep.clone()].to_vec(),
            arousal: labels.arousal[keep.clone()].to_vec(),
            respiratory: labels.respiratory[keep].to_vec(),
            trimmed: true,
        },
        epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::AnnotatedStage;
    use proptest::prelude::*;

    fn ev(kind: EventKind, start: f64, duration: f64) -> ScoredEvent {
        ScoredEvent {
            kind,
            start,
            duration,
            stage: None,
            concept: String::new(),
        }
    }

    fn stage_ev(stage: AnnotatedStage, start: f64, duration: f64) -> ScoredEvent {
        ScoredEvent {
            stage: Some(stage),
            ..ev(EventKind::Stage, start, duration)
        }
    }

    #[test]
    fn single_arousal_overlap() {
        let (l, _) = build_epoch_labels(&[ev(EventKind::Arousal, 35.0, 5.0)], 90.0).unwrap();
        assert_eq!(l.arousal, vec![0, 1, 0]);
    }

    #[test]
    fn hypopnea_spanning_three_epochs() {
        let (l, _) = build_epoch_labels(&[ev(EventKind::Hypopnea, 25.0, 40.0)], 90.0).unwrap();
        assert_eq!(l.respiratory, vec![1, 1, 1]);
    }

    #[test]
    fn half_open_boundary() {
        // [0, 30) ends exactly at the epoch boundary.
        let (l, _) = build_epoch_labels(&[ev(EventKind::ApneaCentral, 0.0, 30.0)], 90.0).unwrap();
        assert_eq!(l.respiratory, vec![1, 0, 0]);
    }

    #[test]
    fn stage_four_merged() {
        let (l, _) =
            build_epoch_labels(&[stage_ev(AnnotatedStage::N4, 0.0, 30.0)], 60.0).unwrap();
        assert_eq!(l.stage, vec![Stage::N3, Stage::W]);
    }

    #[test]
    fn contradictory_stage_keeps_later() {
        let events = [
            stage_ev(AnnotatedStage::N2, 0.0, 60.0),
            stage_ev(AnnotatedStage::Rem, 30.0, 30.0),
        ];
        let (l, w) = build_epoch_labels(&events, 60.0).unwrap();
        assert_eq!(l.stage, vec![Stage::N2, Stage::Rem]);
        assert_eq!(
            w,
            vec![LabelWarning {
                epoch: 1,
                kept: Stage::Rem,
                dropped: Stage::N2
            }]
        );
    }

    #[test]
    fn zero_epochs() {
        assert!(matches!(
            build_epoch_labels(&[], 29.9),
            Err(IngestError::NoEpochs { .. })
        ));
    }

    #[test]
    fn trim_counts() {
        let (l, _) = build_epoch_labels(&[], 1000.0 * 30.0).unwrap();
        let t = trim_boundaries(l, (0..1000).collect(), 60).unwrap();
        assert_eq!(t.labels.n_epochs, 880);
        assert_eq!(t.epochs.len(), 880);
        assert_eq!(t.epochs[0], 60);
        assert!(t.labels.trimmed);

        let (l, _) = build_epoch_labels(&[], 120.0 * 30.0).unwrap();
        assert!(matches!(
            trim_boundaries(l, vec![(); 120], 60),
            Err(IngestError::TooShortToTrim { n_epochs: 120, .. })
        ));
    }

    #[test]
    fn trim_is_sixty_minutes_in_total() {
        let removed_epochs = 2 * crate::ingest::DEFAULT_TRIM_EPOCHS;
        assert_eq!(removed_epochs as f64 * EPOCH_SECONDS / 60.0, 60.0);
    }

    fn brute_force(events: &[(u32, u32)], n_epochs: usize) -> Vec<u8> {
        let mut out = vec![0u8; n_epochs];
        for &(start, dur) in events {
            for sec in start..start + dur {
                let e = (sec / 30) as usize;
                if e < n_epochs {
                    out[e] = 1;
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn arousal_matches_per_second_scan(
            events in prop::collection::vec((0u32..3000, 1u32..120), 0..30),
            n_epochs in 1usize..100,
        ) {
            let scored: Vec<_> = events
                .iter()
                .map(|&(s, d)| ev(EventKind::Arousal, s as f64, d as f64))
                .collect();
            let (l, _) = build_epoch_labels(&scored, n_epochs as f64 * 30.0).unwrap();
            prop_assert_eq!(l.arousal, brute_force(&events, n_epochs));
        }

        #[test]
        fn trimming_preserves_alignment(
            stages in prop::collection::vec(0usize..5, 121..300),
            arousal in prop::collection::vec(0u8..2, 300),
        ) {
            let n = stages.len();
            let labels = EpochLabels {
                n_epochs: n,
                stage: stages.iter().map(|&i| Stage::from_index(i).unwrap()).collect(),
                arousal: arousal[..n].to_vec(),
                respiratory: arousal[..n].iter().map(|a| 1 - a).collect(),
                trimmed: false,
            };
            let epochs: Vec<usize> = (0..n).collect();
            let t = trim_boundaries(labels.clone(), epochs, 60).unwrap();
            for i in 0..t.labels.n_epochs {
                prop_assert_eq!(t.labels.stage[i], labels.stage[i + 60]);
                prop_assert_eq!(t.labels.arousal[i], labels.arousal[i + 60]);
                prop_assert_eq!(t.labels.respiratory[i], labels.respiratory[i + 60]);
                prop_assert_eq!(t.epochs[i], i + 60);
            }
        }
    }
}
