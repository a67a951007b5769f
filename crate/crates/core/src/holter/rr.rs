use serde::{Deserialize, Serialize};

use super::ectopy::{BeatAnnotations, BeatLabel};
use super::HolterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RrFlag {
    Valid,
    EctopicAdjacent,
    Artifact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrConfig {
    pub min_ms: f64,
    pub max_ms: f64,
    /// Intervals further than this fraction from the local median are
    /// artifacts (missed or spurious detections). `None` disables.
    pub relative_tolerance: Option<f64>,
    /// Number of intervals in the local-median window.
    pub relative_window: usize,
    /// Max distance when matching annotated beats to detected beats.
    pub match_tolerance_s: f64,
}

impl Default for RrConfig {
    fn default() -> Self {
        RrConfig {
            min_ms: 300.0,
            max_ms: 2000.0,
            relative_tolerance: Some(0.3),
            relative_window: 11,
            match_tolerance_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrSeries {
    pub beat_times: Vec<f64>,
    pub rr_ms: Vec<f64>,
    pub flags: Vec<RrFlag>,
}

impl RrSeries {
    /// Intervals from beat times with absolute-bound flags only.
    pub fn from_beats(times: &[f64], cfg: &RrConfig) -> Result<Self, HolterError> {
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HolterError::Unsorted);
        }
        let rr_ms: Vec<f64> = times.windows(2).map(|w| 1000.0 * (w[1] - w[0])).collect();
        let flags = rr_ms
            .iter()
            .map(|r| if *r >= cfg.min_ms && *r <= cfg.max_ms { RrFlag::Valid } else { RrFlag::Artifact })
            .collect();
        Ok(RrSeries { beat_times: times.to_vec(), rr_ms, flags })
    }

    /// Detector output: absolute bounds plus the local-median rule.
    pub fn from_detections(times: &[f64], cfg: &RrConfig) -> Result<Self, HolterError> {
        let mut s = Self::from_beats(times, cfg)?;
        if let Some(tol) = cfg.relative_tolerance {
            s.flag_relative_outliers(cfg.relative_window, tol);
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.rr_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rr_ms.is_empty()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.flags[i] == RrFlag::Valid
    }

    /// Time of the beat that closes interval `i`.
    pub fn end_time(&self, i: usize) -> f64 {
        self.beat_times[i + 1]
    }

    pub fn valid_rr(&self) -> Vec<f64> {
        (0..self.len()).filter(|&i| self.is_valid(i)).map(|i| self.rr_ms[i]).collect()
    }

    pub fn flag_relative_outliers(&mut self, window: usize, tolerance: f64) {
        let n = self.len();
        let half = window.max(1) / 2;
        let mut marks = Vec::new();
        for i in 0..n {
            if self.flags[i] != RrFlag::Valid {
                continue;
            }
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let local: Vec<f64> =
                (lo..hi).filter(|&j| self.flags[j] == RrFlag::Valid).map(|j| self.rr_ms[j]).collect();
            let med = crate::stats::median(&local).unwrap_or(self.rr_ms[i]);
            if (self.rr_ms[i] - med).abs() > tolerance * med {
                marks.push(i);
            }
        }
        for i in marks {
            self.flags[i] = RrFlag::Artifact;
        }
    }

    /// Flag intervals touching a beat annotated as anything but normal.
    /// Annotated beats are matched to the nearest series beat.
    pub fn mark_ectopic(&mut self, ann: &BeatAnnotations, tolerance_s: f64) {
        let t = &self.beat_times;
        if t.is_empty() {
            return;
        }
        let mut hit = vec![false; t.len()];
        for b in ann.beats.iter().filter(|b| b.label != BeatLabel::Normal) {
            let k = t.partition_point(|x| *x < b.time);
            let near = [k.checked_sub(1), Some(k).filter(|&k| k < t.len())]
                .into_iter()
                .flatten()
                .min_by(|p, q| (t[*p] - b.time).abs().total_cmp(&(t[*q] - b.time).abs()));
            if let Some(j) = near.filter(|&j| (t[j] - b.time).abs() <= tolerance_s) {
                hit[j] = true;
            }
        }
        for i in 0..self.len() {
            if (hit[i] || hit[i + 1]) && self.flags[i] == RrFlag::Valid {
                self.flags[i] = RrFlag::EctopicAdjacent;
            }
        }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        RrSeries { beat_times: self.beat_times.iter().map(|t| t + dt).collect(), ..self.clone() }
    }
}
