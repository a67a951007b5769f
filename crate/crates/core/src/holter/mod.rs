//! The 32 Holter-grade cardiac metrics: R-peak detection, heart-rate
//! statistics, time and frequency HRV, and ectopy / rhythm burden from
//! supplied beat annotations.

mod beats_file;
mod ectopy;
mod hr;
mod hrv;
mod rpeak;
mod rr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use beats_file::{parse_beat_annotations, write_beat_annotations};
pub use ectopy::{
    attribute, ectopy_burden, Beat, BeatAnnotations, BeatLabel, BurdenConfig, Ectopy, Episode, EpisodeKind,
    Pattern, PatternCounts,
};
pub use hr::{hr_stats, median_smoothed, HrConfig, HrStats, Run};
pub use hrv::{hrv_freq, hrv_time, successive_differences, tachogram, FrequencyDomain, HrvConfig, TimeDomain};
pub use rpeak::{detect_rpeaks, integrated_energy, DetectorConfig};
pub use rr::{RrConfig, RrFlag, RrSeries};

#[derive(Debug, Error)]
pub enum HolterError {
    #[error("beat times or annotations are not sorted")]
    Unsorted,
    #[error("need at least 2 beats, got {0}")]
    TooFewBeats(usize),
    #[error("no valid RR intervals")]
    NoValidIntervals,
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
    #[error("invalid recording duration {0}")]
    InvalidDuration(f64),
    #[error("beat annotations line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HolterConfig {
    pub detector: DetectorConfig,
    pub rr: RrConfig,
    pub hr: HrConfig,
    pub hrv: HrvConfig,
    pub burden: BurdenConfig,
}

pub const HOLTER_KEYS: [&str; 32] = [
    "Total_valid_beats",
    "Avg_HR",
    "Min_HR",
    "Max_HR",
    "Snt_max_beat_count",
    "Snt_duration",
    "Snb_max_beat_count",
    "Snb_duration",
    "Total_PAC",
    "Single_PAC",
    "Paired_PAC",
    "Bigeminy_PAC",
    "Triad_PAC",
    "Total_PVC",
    "Single_PVC",
    "Paired_PVC",
    "Bigeminy_PVC",
    "Triad_PVC",
    "Total_VT",
    "Total_SVT",
    "SDNN",
    "SDANN",
    "SDANNIndex",
    "RMSSD",
    "pNN50",
    "HRV_tri",
    "LF",
    "HF",
    "LFNU",
    "HFNU",
    "LF/HF",
    "AF_duration",
];

/// Flat cardiac metric vector in canonical key order. Heart rates in bpm,
/// run durations in seconds, HRV in ms / ms², AF duration in minutes.
/// Items that cannot be computed are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CardiacMetrics {
    pub values: [Option<f64>; 32],
    /// Extremes of the unsmoothed instantaneous HR.
    pub raw_hr_range: Option<(f64, f64)>,
    /// PAC and PVC per hour, when annotations were supplied.
    pub burden: Option<(f64, f64)>,
}

impl CardiacMetrics {
    pub fn get(&self, key: &str) -> Option<f64> {
        HOLTER_KEYS.iter().position(|k| *k == key).and_then(|i| self.values[i])
    }

    fn set(&mut self, key: &str, v: Option<f64>) {
        let i = HOLTER_KEYS.iter().position(|k| *k == key).expect("canonical key");
        self.values[i] = v;
    }

    pub fn entries(&self) -> impl Iterator<Item = (&'static str, Option<f64>)> + '_ {
        HOLTER_KEYS.iter().copied().zip(self.values.iter().copied())
    }
}

impl Serialize for CardiacMetrics {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(32))?;
        for (k, v) in self.entries() {
            m.serialize_entry(k, &v)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for CardiacMetrics {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = std::collections::BTreeMap::<String, Option<f64>>::deserialize(d)?;
        let mut out = CardiacMetrics::default();
        for (i, k) in HOLTER_KEYS.iter().enumerate() {
            out.values[i] = *map.get(*k).ok_or_else(|| serde::de::Error::missing_field(k))?;
        }
        Ok(out)
    }
}

fn count(v: usize) -> Option<f64> {
    Some(v as f64)
}

/// Metrics from an RR series and optional beat annotations covering
/// `duration_s` seconds.
pub fn cardiac_metrics(
    rr: &RrSeries,
    annotations: Option<&BeatAnnotations>,
    duration_s: f64,
    cfg: &HolterConfig,
) -> Result<CardiacMetrics, HolterError> {
    let mut m = CardiacMetrics::default();
    let hr = hr_stats(rr, &cfg.hr)?;
    m.set("Total_valid_beats", count(hr.total_valid_beats));
    m.set("Avg_HR", Some(hr.avg_hr));
    m.set("Min_HR", Some(hr.min_hr));
    m.set("Max_HR", Some(hr.max_hr));
    m.set("Snt_max_beat_count", count(hr.tachycardia.beats));
    m.set("Snt_duration", Some(hr.tachycardia.duration_s));
    m.set("Snb_max_beat_count", count(hr.bradycardia.beats));
    m.set("Snb_duration", Some(hr.bradycardia.duration_s));
    m.raw_hr_range = Some((hr.raw_min_hr, hr.raw_max_hr));

    if let Some(ann) = annotations {
        let e = ectopy_burden(ann, duration_s, &cfg.burden)?;
        for (suffix, c) in [("PAC", e.pac), ("PVC", e.pvc)] {
            m.set(&format!("Total_{suffix}"), count(c.total));
            m.set(&format!("Single_{suffix}"), count(c.single));
            m.set(&format!("Paired_{suffix}"), count(c.paired));
            m.set(&format!("Bigeminy_{suffix}"), count(c.bigeminy));
            m.set(&format!("Triad_{suffix}"), count(c.triad));
        }
        m.set("Total_VT", count(e.total_vt));
        m.set("Total_SVT", count(e.total_svt));
        m.set("AF_duration", Some(e.af_minutes));
        m.burden = Some((e.pac_per_hour, e.pvc_per_hour));
    }

    let td = hrv_time(rr, &cfg.hrv);
    m.set("SDNN", td.sdnn);
    m.set("SDANN", td.sdann);
    m.set("SDANNIndex", td.sdann_index);
    m.set("RMSSD", td.rmssd);
    m.set("pNN50", td.pnn50);
    m.set("HRV_tri", td.triangular_index);

    let fd = hrv_freq(rr, &cfg.hrv);
    m.set("LF", fd.lf);
    m.set("HF", fd.hf);
    m.set("LFNU", fd.lf_nu);
    m.set("HFNU", fd.hf_nu);
    m.set("LF/HF", fd.lf_hf);
    Ok(m)
}

/// Detection, RR flagging and metrics from a preprocessed ECG.
pub fn analyze_ecg(
    ecg: &[f64],
    fs: f64,
    annotations: Option<&BeatAnnotations>,
    cfg: &HolterConfig,
) -> Result<(RrSeries, CardiacMetrics), HolterError> {
    let beats = detect_rpeaks(ecg, fs, &cfg.detector);
    let mut rr = RrSeries::from_detections(&beats, &cfg.rr)?;
    if let Some(ann) = annotations {
        rr.mark_ectopic(ann, cfg.rr.match_tolerance_s);
    }
    let metrics = cardiac_metrics(&rr, annotations, ecg.len() as f64 / fs, cfg)?;
    Ok((rr, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keys_and_nulls() {
        let t: Vec<f64> = (0..400).map(|i| i as f64 * 0.8).collect();
        let rr = RrSeries::from_beats(&t, &RrConfig::default()).unwrap();
        let m = cardiac_metrics(&rr, None, 320.0, &HolterConfig::default()).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), 32);
        assert!(obj["Total_PVC"].is_null());
        assert!(obj["SDANN"].is_null());
        assert!((m.get("Avg_HR").unwrap() - 75.0).abs() < 1e-9);
        let back: CardiacMetrics = serde_json::from_value(v).unwrap();
        assert_eq!(back.values, m.values);
    }

    #[test]
    fn component_totals_bounded() {
        let labels: Vec<BeatLabel> = "NNVNNVVNNVVVNNSNSNSNNVNVNVNVVVVN".chars().map(|c| BeatLabel::parse(&c.to_string())).collect();
        let ann = BeatAnnotations::from_labels(&labels, 0.8);
        let rr = RrSeries::from_beats(&ann.beats.iter().map(|b| b.time).collect::<Vec<_>>(), &RrConfig::default()).unwrap();
        let m = cardiac_metrics(&rr, Some(&ann), 3600.0, &HolterConfig::default()).unwrap();
        for cls in ["PAC", "PVC"] {
            let total = m.get(&format!("Total_{cls}")).unwrap();
            for part in ["Single", "Paired", "Bigeminy", "Triad"] {
                assert!(m.get(&format!("{part}_{cls}")).unwrap() <= total);
            }
        }
        assert_eq!(m.get("Total_VT"), Some(2.0));
        assert_eq!(m.get("Bigeminy_PAC"), Some(1.0));
    }
}
