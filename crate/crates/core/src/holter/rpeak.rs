//! Derivative / energy / integration QRS detector with adaptive dual
//! thresholds and RR-based searchback.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub integration_ms: f64,
    pub refractory_ms: f64,
    /// Searchback triggers after this multiple of the recent mean RR.
    pub searchback_factor: f64,
    /// Half-width of the window in which the R apex is located.
    pub locate_ms: f64,
    pub learning_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            integration_ms: 150.0,
            refractory_ms: 200.0,
            searchback_factor: 1.66,
            locate_ms: 120.0,
            learning_s: 2.0,
        }
    }
}

/// Moving-window integration of the squared derivative, centred so the
/// output is aligned with the QRS.
pub fn integrated_energy(x: &[f64], fs: f64, integration_ms: f64) -> Vec<f64> {
    let n = x.len();
    let at = |i: isize| x[i.clamp(0, n as isize - 1) as usize];
    let e: Vec<f64> = (0..n as isize)
        .map(|i| {
            let d = (-at(i - 2) - 2.0 * at(i - 1) + 2.0 * at(i + 1) + at(i + 2)) / 8.0;
            d * d
        })
        .collect();
    let w = (((integration_ms / 1000.0) * fs).round() as usize).max(1) | 1;
    let half = w / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in &e {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / w as f64
        })
        .collect()
}

struct Thresholds {
    spki: f64,
    npki: f64,
}

impl Thresholds {
    fn t1(&self) -> f64 {
        self.npki + 0.25 * (self.spki - self.npki)
    }
}

/// Beat times in seconds.
pub fn detect_rpeaks(x: &[f64], fs: f64, cfg: &DetectorConfig) -> Vec<f64> {
    let n = x.len();
    if n < 5 || x.iter().all(|v| *v == x[0]) {
        log::warn!("flat or empty ECG; no beats detected");
        return Vec::new();
    }
    let m = integrated_energy(x, fs, cfg.integration_ms);
    let refractory = ((cfg.refractory_ms / 1000.0) * fs).round() as usize;

    // Local maxima of the integrated energy, thinned so that within one
    // refractory period only the largest survives.
    let mut cands: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        if m[i] > m[i - 1] && m[i] >= m[i + 1] && m[i] > 0.0 {
            match cands.last() {
                Some(&j) if i - j < refractory => {
                    if m[i] > m[j] {
                        *cands.last_mut().unwrap() = i;
                    }
                }
                _ => cands.push(i),
            }
        }
    }
    if cands.is_empty() {
        log::warn!("no QRS candidates found");
        return Vec::new();
    }

    let learn = ((cfg.learning_s * fs) as usize).clamp(1, n);
    let head = &m[..learn];
    let mut th = Thresholds {
        spki: 0.25 * head.iter().copied().fold(0.0, f64::max),
        npki: 0.5 * head.iter().sum::<f64>() / learn as f64,
    };

    let mut beats: Vec<usize> = Vec::new();
    let mut rr_recent: Vec<usize> = Vec::new();
    let mut noise_since: Vec<usize> = Vec::new();
    let accept = |i: usize, beats: &mut Vec<usize>, rr: &mut Vec<usize>| {
        if let Some(&last) = beats.last() {
            rr.push(i - last);
            if rr.len() > 8 {
                rr.remove(0);
            }
        }
        beats.push(i);
    };

    for &c in &cands {
        // Searchback for a missed beat before handling `c`.
        if let (Some(&last), false) = (beats.last(), rr_recent.is_empty()) {
            let mean_rr = rr_recent.iter().sum::<usize>() as f64 / rr_recent.len() as f64;
            if (c - last) as f64 > cfg.searchback_factor * mean_rr {
                let t2 = 0.5 * th.t1();
                let best = noise_since
                    .iter()
                    .copied()
                    .filter(|&j| j >= last + refractory && c >= j + refractory && m[j] > t2)
                    .max_by(|a, b| m[*a].total_cmp(&m[*b]));
                if let Some(j) = best {
                    th.spki = 0.25 * m[j] + 0.75 * th.spki;
                    accept(j, &mut beats, &mut rr_recent);
                    noise_since.clear();
                }
            }
        }
        let clear = beats.last().is_none_or(|&last| c >= last + refractory);
        if m[c] > th.t1() && clear {
            th.spki = 0.125 * m[c] + 0.875 * th.spki;
            accept(c, &mut beats, &mut rr_recent);
            noise_since.clear();
        } else {
            th.npki = 0.125 * m[c] + 0.875 * th.npki;
            noise_since.push(c);
        }
    }

    let half = ((cfg.locate_ms / 1000.0) * fs).round() as usize;
    let mut times: Vec<f64> = Vec::with_capacity(beats.len());
    for b in beats {
        let lo = b.saturating_sub(half);
        let hi = (b + half + 1).min(n);
        let k = (lo..hi).max_by(|p, q| x[*p].total_cmp(&x[*q])).unwrap();
        let mut t = k as f64;
        if k > 0 && k + 1 < n {
            let (a, y, c) = (x[k - 1], x[k], x[k + 1]);
            let den = a - 2.0 * y + c;
            if den < 0.0 {
                t += (0.5 * (a - c) / den).clamp(-0.5, 0.5);
            }
        }
        let t = t / fs;
        if times.last().is_none_or(|&p| t - p >= cfg.refractory_ms / 1000.0) {
            times.push(t);
        }
    }
    times
}
