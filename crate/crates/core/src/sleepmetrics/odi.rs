use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::SleepError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdiConfig {
    /// Baseline is the running maximum over this many preceding seconds.
    pub baseline_window_s: f64,
    pub min_duration_s: f64,
    /// Longer runs are discarded when set.
    pub max_duration_s: Option<f64>,
    pub clamp: [f64; 2],
}

impl Default for OdiConfig {
    fn default() -> Self {
        OdiConfig {
            baseline_window_s: 120.0,
            min_duration_s: 10.0,
            max_duration_s: None,
            clamp: [50.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesaturationEvent {
    pub start: f64,
    pub duration: f64,
    /// Baseline minus the lowest value in the event.
    pub drop: f64,
    /// Baseline at event onset.
    pub baseline: f64,
}

/// Running maximum over `x[i - w ..= i]` with a monotone deque.
fn running_max(x: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut dq: VecDeque<usize> = VecDeque::new();
    for i in 0..x.len() {
        while dq.back().is_some_and(|&j| x[j] <= x[i]) {
            dq.pop_back();
        }
        dq.push_back(i);
        while dq.front().is_some_and(|&j| j + w < i) {
            dq.pop_front();
        }
        out.push(x[dq[0]]);
    }
    out
}

/// Maximal runs where SpO2 sits at least `threshold` points below the
/// running baseline, kept when their duration is within bounds.
pub fn detect_desaturations(
    spo2: &[f64],
    fs: f64,
    threshold: f64,
    cfg: &OdiConfig,
) -> Result<Vec<DesaturationEvent>, SleepError> {
    if spo2.is_empty() {
        return Err(SleepError::EmptySpo2);
    }
    if !(fs > 0.0) {
        return Err(SleepError::InvalidRate(fs));
    }
    let x: Vec<f64> = spo2.iter().map(|v| v.clamp(cfg.clamp[0], cfg.clamp[1])).collect();
    let w = (cfg.baseline_window_s * fs).round() as usize;
    let base = running_max(&x, w);
    let mut events = Vec::new();
    let mut i = 0;
    while i < x.len() {
        if x[i] > base[i] - threshold {
            i += 1;
            continue;
        }
        let start = i;
        while i < x.len() && x[i] <= base[i] - threshold {
            i += 1;
        }
        let duration = (i - start) as f64 / fs;
        let long_enough = duration >= cfg.min_duration_s;
        let short_enough = cfg.max_duration_s.is_none_or(|m| duration <= m);
        if long_enough && short_enough {
            let low = x[start..i].iter().copied().fold(f64::INFINITY, f64::min);
            events.push(DesaturationEvent {
                start: start as f64 / fs,
                duration,
                drop: base[start] - low,
                baseline: base[start],
            });
        }
    }
    Ok(events)
}

pub fn oxygen_desaturation_index(events: &[DesaturationEvent], tst_minutes: f64) -> Option<f64> {
    if !(tst_minutes > 0.0) {
        return None;
    }
    Some(events.len() as f64 / (tst_minutes / 60.0))
}
