use serde::{Deserialize, Serialize};

use super::rr::RrSeries;
use super::HolterError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HrConfig {
    pub tachycardia_bpm: f64,
    /// Bradycardia is HR at or below this value.
    pub bradycardia_bpm: f64,
    pub smoothing_s: f64,
}

impl Default for HrConfig {
    fn default() -> Self {
        HrConfig { tachycardia_bpm: 100.0, bradycardia_bpm: 60.0, smoothing_s: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Run {
    pub beats: usize,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrStats {
    pub total_valid_beats: usize,
    pub avg_hr: f64,
    /// Extremes of the windowed mean HR.
    pub min_hr: f64,
    pub max_hr: f64,
    /// Extremes of the instantaneous HR.
    pub raw_min_hr: f64,
    pub raw_max_hr: f64,
    pub tachycardia: Run,
    pub bradycardia: Run,
}

/// Median of the valid HR values whose interval closes within
/// `±half_window` seconds of each valid interval.
pub fn median_smoothed(times: &[f64], hr: &[f64], half_window: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(hr.len());
    let (mut lo, mut hi) = (0, 0);
    for &t in times {
        while times[lo] < t - half_window {
            lo += 1;
        }
        while hi < times.len() && times[hi] <= t + half_window {
            hi += 1;
        }
        out.push(crate::stats::median(&hr[lo..hi]).unwrap());
    }
    out
}

fn longest_run(rr: &RrSeries, valid_pos: &[usize], hit: impl Fn(usize) -> bool) -> Run {
    let mut best = Run::default();
    let mut cur = Run::default();
    let mut prev: Option<usize> = None;
    for (k, &i) in valid_pos.iter().enumerate() {
        let contiguous = prev.is_some_and(|p| p + 1 == i);
        if hit(k) {
            if !contiguous || cur.beats == 0 {
                cur = Run::default();
            }
            cur.beats += 1;
            cur.duration_s += rr.rr_ms[i] / 1000.0;
            if cur.beats > best.beats || (cur.beats == best.beats && cur.duration_s > best.duration_s) {
                best = cur;
            }
        } else {
            cur = Run::default();
        }
        prev = Some(i);
    }
    best
}

pub fn hr_stats(rr: &RrSeries, cfg: &HrConfig) -> Result<HrStats, HolterError> {
    if rr.beat_times.len() < 2 {
        return Err(HolterError::TooFewBeats(rr.beat_times.len()));
    }
    let valid_pos: Vec<usize> = (0..rr.len()).filter(|&i| rr.is_valid(i)).collect();
    if valid_pos.is_empty() {
        return Err(HolterError::NoValidIntervals);
    }
    let hr: Vec<f64> = valid_pos.iter().map(|&i| 60000.0 / rr.rr_ms[i]).collect();
    let times: Vec<f64> = valid_pos.iter().map(|&i| rr.end_time(i)).collect();

    let mut endpoint = vec![false; rr.beat_times.len()];
    for &i in &valid_pos {
        endpoint[i] = true;
        endpoint[i + 1] = true;
    }

    // Non-overlapping windows from the first valid interval; the overall
    // mean is a count-weighted mean of the window means, so it lies between
    // their extremes.
    let t0 = times[0];
    let mut windows: Vec<(f64, usize)> = Vec::new();
    let mut current: Option<usize> = None;
    for (h, t) in hr.iter().zip(&times) {
        let w = ((t - t0) / cfg.smoothing_s).floor() as usize;
        if current != Some(w) {
            windows.push((0.0, 0));
            current = Some(w);
        }
        let last = windows.last_mut().unwrap();
        last.0 += h;
        last.1 += 1;
    }
    let means: Vec<f64> = windows.iter().map(|(s, c)| s / *c as f64).collect();

    let smoothed = median_smoothed(&times, &hr, cfg.smoothing_s / 2.0);
    let tachycardia = longest_run(rr, &valid_pos, |k| smoothed[k] > cfg.tachycardia_bpm);
    let bradycardia = longest_run(rr, &valid_pos, |k| smoothed[k] <= cfg.bradycardia_bpm);

    Ok(HrStats {
        total_valid_beats: endpoint.iter().filter(|v| **v).count(),
        avg_hr: hr.iter().sum::<f64>() / hr.len() as f64,
        min_hr: means.iter().copied().fold(f64::INFINITY, f64::min),
        max_hr: means.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        raw_min_hr: hr.iter().copied().fold(f64::INFINITY, f64::min),
        raw_max_hr: hr.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        tachycardia,
        bradycardia,
    })
}

#[cfg(test)]
mod tests {
    use super::super::rr::RrConfig;
    use super::*;
    use proptest::prelude::*;

    fn series(rr_ms: &[f64]) -> RrSeries {
        let mut t = vec![0.0];
        for r in rr_ms {
            t.push(t.last().unwrap() + r / 1000.0);
        }
        RrSeries::from_beats(&t, &RrConfig::default()).unwrap()
    }

    #[test]
    fn constant_sixty() {
        let s = hr_stats(&series(&[1000.0; 600]), &HrConfig::default()).unwrap();
        assert!((s.avg_hr - 60.0).abs() < 1e-9);
        assert!((s.min_hr - 60.0).abs() < 1e-9 && (s.max_hr - 60.0).abs() < 1e-9);
        assert_eq!(s.bradycardia.beats, 600);
        assert!((s.bradycardia.duration_s - 600.0).abs() < 1e-6);
        assert_eq!(s.tachycardia, Run::default());
        assert_eq!(s.total_valid_beats, 601);
    }

    #[test]
    fn alternating_mean() {
        let rr: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 500.0 } else { 1500.0 }).collect();
        let s = hr_stats(&series(&rr), &HrConfig::default()).unwrap();
        assert!((s.avg_hr - 80.0).abs() < 1e-9);
        assert_eq!((s.raw_min_hr, s.raw_max_hr), (40.0, 120.0));
    }

    #[test]
    fn strict_tachycardia_boundary() {
        let s = hr_stats(&series(&[600.0]), &HrConfig::default()).unwrap();
        assert!((s.avg_hr - 100.0).abs() < 1e-9);
        assert_eq!(s.tachycardia.beats, 0);
    }

    #[test]
    fn tachy_run_broken_by_artifact() {
        let mut rr = vec![500.0; 40];
        rr[20] = 100.0;
        let s = hr_stats(&series(&rr), &HrConfig::default()).unwrap();
        assert_eq!(s.tachycardia.beats, 20);
        assert!((s.tachycardia.duration_s - 10.0).abs() < 1e-9);
    }

    #[test]
    fn too_few() {
        let s = RrSeries::from_beats(&[1.0], &RrConfig::default()).unwrap();
        assert!(hr_stats(&s, &HrConfig::default()).is_err());
    }

    proptest! {
        #[test]
        fn min_avg_max_ordered(rr in prop::collection::vec(300.0f64..2000.0, 2..400)) {
            let s = hr_stats(&series(&rr), &HrConfig::default()).unwrap();
            prop_assert!(s.min_hr <= s.avg_hr + 1e-9);
            prop_assert!(s.avg_hr <= s.max_hr + 1e-9);
            prop_assert!(s.raw_min_hr <= s.min_hr + 1e-9 && s.max_hr <= s.raw_max_hr + 1e-9);
        }
    }
}
