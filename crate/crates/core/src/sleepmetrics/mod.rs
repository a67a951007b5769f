//! The 16 sleep metrics: hypnogram summaries, epoch-based event indices
//! and oxygen desaturation indices.

mod odi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use odi::{detect_desaturations, oxygen_desaturation_index, DesaturationEvent, OdiConfig};

use crate::ingest::{EventKind, ScoredEvent};
use crate::Stage;

pub const EPOCH_MINUTES: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum SleepError {
    #[error("empty stage sequence")]
    EmptyHypnogram,
    #[error("empty SpO2 signal")]
    EmptySpo2,
    #[error("invalid SpO2 sampling rate {0}")]
    InvalidRate(f64),
}

/// Canonical sleep metrics. Durations in minutes, ratios in percent,
/// indices in events per hour; `None` serialises as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SleepMetrics {
    #[serde(rename = "TIB")]
    pub tib: f64,
    #[serde(rename = "TST")]
    pub tst: f64,
    #[serde(rename = "SE")]
    pub se: f64,
    #[serde(rename = "SL")]
    pub sl: f64,
    #[serde(rename = "WASO")]
    pub waso: f64,
    #[serde(rename = "TTSP")]
    pub ttsp: f64,
    #[serde(rename = "Wake_TIB")]
    pub wake_tib: f64,
    #[serde(rename = "N1_TST")]
    pub n1_tst: f64,
    #[serde(rename = "N2_TST")]
    pub n2_tst: f64,
    #[serde(rename = "N3_TST")]
    pub n3_tst: f64,
    #[serde(rename = "NREM_TST")]
    pub nrem_tst: f64,
    #[serde(rename = "REM_TST")]
    pub rem_tst: f64,
    #[serde(rename = "AHI")]
    pub ahi: Option<f64>,
    #[serde(rename = "ArI")]
    pub ari: Option<f64>,
    #[serde(rename = "ODI3")]
    pub odi3: Option<f64>,
    #[serde(rename = "ODI4")]
    pub odi4: Option<f64>,
    /// No sleep epochs: stage fractions are reported as 0.
    #[serde(skip)]
    pub degenerate: bool,
}

pub const SLEEP_KEYS: [&str; 16] = [
    "TIB", "TST", "SE", "SL", "WASO", "TTSP", "Wake_TIB", "N1_TST", "N2_TST", "N3_TST", "NREM_TST",
    "REM_TST", "AHI", "ArI", "ODI3", "ODI4",
];

impl SleepMetrics {
    /// `(key, value)` in canonical order.
    pub fn entries(&self) -> [(&'static str, Option<f64>); 16] {
        let v = [
            Some(self.tib),
            Some(self.tst),
            Some(self.se),
            Some(self.sl),
            Some(self.waso),
            Some(self.ttsp),
            Some(self.wake_tib),
            Some(self.n1_tst),
            Some(self.n2_tst),
            Some(self.n3_tst),
            Some(self.nrem_tst),
            Some(self.rem_tst),
            self.ahi,
            self.ari,
            self.odi3,
            self.odi4,
        ];
        std::array::from_fn(|i| (SLEEP_KEYS[i], v[i]))
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries().into_iter().find(|(k, _)| *k == key).and_then(|(_, v)| v)
    }
}

/// Hypnogram-derived metrics; the four event indices are left `None`.
pub fn hypnogram_metrics(stages: &[Stage]) -> Result<SleepMetrics, SleepError> {
    if stages.is_empty() {
        return Err(SleepError::EmptyHypnogram);
    }
    let n = stages.len();
    let mut counts = [0usize; 5];
    for s in stages {
        counts[s.index()] += 1;
    }
    let minutes = |c: usize| c as f64 * EPOCH_MINUTES;
    let tib = minutes(n);
    let n_sleep = n - counts[Stage::W.index()];
    let tst = minutes(n_sleep);
    let first = stages.iter().position(|s| s.is_sleep());
    let last = stages.iter().rposition(|s| s.is_sleep());
    let (sl, waso, ttsp) = match (first, last) {
        (Some(f), Some(l)) => {
            let inner_wake = stages[f..=l].iter().filter(|s| !s.is_sleep()).count();
            (minutes(f), minutes(inner_wake), minutes(l - f + 1))
        }
        _ => (tib, 0.0, 0.0),
    };
    let degenerate = n_sleep == 0;
    let of_tst = |m: f64| if degenerate { 0.0 } else { 100.0 * m / tst };
    let n1 = minutes(counts[Stage::N1.index()]);
    let n2 = minutes(counts[Stage::N2.index()]);
    let n3 = minutes(counts[Stage::N3.index()]);
    let rem = minutes(counts[Stage::Rem.index()]);
    Ok(SleepMetrics {
        tib,
        tst,
        se: 100.0 * tst / tib,
        sl,
        waso,
        ttsp,
        wake_tib: 100.0 * minutes(counts[Stage::W.index()]) / tib,
        n1_tst: of_tst(n1),
        n2_tst: of_tst(n2),
        n3_tst: of_tst(n3),
        nrem_tst: of_tst(minutes(counts[1] + counts[2] + counts[3])),
        rem_tst: of_tst(rem),
        ahi: None,
        ari: None,
        odi3: None,
        odi4: None,
        degenerate,
    })
}

/// Positive epochs per hour of sleep (an epoch-count surrogate for event
/// counts). `None` when there is no sleep.
pub fn event_index(positive: &[u8], tst_minutes: f64) -> Option<f64> {
    if !(tst_minutes > 0.0) {
        return None;
    }
    let count = positive.iter().filter(|v| **v != 0).count();
    Some(count as f64 / (tst_minutes / 60.0))
}

/// Annotated events of the selected kinds per hour of sleep.
pub fn annotated_event_index(
    events: &[ScoredEvent],
    select: impl Fn(EventKind) -> bool,
    tst_minutes: f64,
) -> Option<f64> {
    if !(tst_minutes > 0.0) {
        return None;
    }
    let count = events.iter().filter(|e| select(e.kind)).count();
    Some(count as f64 / (tst_minutes / 60.0))
}

/// Inputs for the full 16-metric vector.
pub struct SleepInputs<'a> {
    pub stages: &'a [Stage],
    pub arousal: &'a [u8],
    pub respiratory: &'a [u8],
    pub spo2: Option<(&'a [f64], f64)>,
}

pub fn sleep_metrics(inputs: &SleepInputs, odi: &OdiConfig) -> Result<SleepMetrics, SleepError> {
    let mut m = hypnogram_metrics(inputs.stages)?;
    m.ahi = event_index(inputs.respiratory, m.tst);
    m.ari = event_index(inputs.arousal, m.tst);
    if let Some((spo2, fs)) = inputs.spo2 {
        m.odi3 = oxygen_desaturation_index(&detect_desaturations(spo2, fs, 3.0, odi)?, m.tst);
        m.odi4 = oxygen_desaturation_index(&detect_desaturations(spo2, fs, 4.0, odi)?, m.tst);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Stage::*;

    #[test]
    fn worked_example() {
        // Six of the ten epochs are sleep.
        let m = hypnogram_metrics(&[W, W, N1, N2, N2, N3, Rem, W, N2, W]).unwrap();
        assert_eq!(m.tib, 5.0);
        assert_eq!(m.tst, 3.0);
        assert_eq!(m.se, 60.0);
        assert_eq!(m.sl, 1.0);
        assert_eq!(m.waso, 0.5);
        assert_eq!(m.ttsp, 3.5);
        assert_eq!(m.wake_tib, 40.0);
        assert!((m.n1_tst - 100.0 / 6.0).abs() < 1e-12);
        assert!((m.n2_tst - 50.0).abs() < 1e-12);
        assert!((m.rem_tst - 100.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn all_wake() {
        let m = hypnogram_metrics(&[W; 12]).unwrap();
        assert!(m.degenerate);
        assert_eq!((m.tst, m.se, m.sl, m.waso, m.ttsp), (0.0, 0.0, 6.0, 0.0, 0.0));
        assert_eq!((m.n1_tst, m.n2_tst, m.n3_tst, m.nrem_tst, m.rem_tst), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(event_index(&[1; 12], m.tst), None);
    }

    #[test]
    fn all_n2() {
        let m = hypnogram_metrics(&[N2; 20]).unwrap();
        assert_eq!((m.se, m.sl, m.waso, m.n2_tst), (100.0, 0.0, 0.0, 100.0));
    }

    #[test]
    fn empty() {
        assert_eq!(hypnogram_metrics(&[]), Err(SleepError::EmptyHypnogram));
    }

    #[test]
    fn event_index_examples() {
        let mut pos = vec![0u8; 720];
        pos[..20].fill(1);
        assert!((event_index(&pos, 360.0).unwrap() - 20.0 / 6.0).abs() < 1e-12);
        assert_eq!(event_index(&[0; 10], 360.0), Some(0.0));
        assert_eq!(event_index(&[1; 10], 0.0), None);
    }

    #[test]
    fn json_has_canonical_keys() {
        let m = hypnogram_metrics(&[W, N2, N2, W]).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 16);
        for k in SLEEP_KEYS {
            assert!(obj.contains_key(k), "{k}");
        }
        assert!(obj["AHI"].is_null());
        assert_eq!(m.get("SE"), Some(50.0));
    }
}
