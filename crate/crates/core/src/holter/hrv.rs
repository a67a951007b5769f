use serde::{Deserialize, Serialize};

use super::rr::RrSeries;
use crate::dsp::remove_baseline;
use crate::features::{welch_psd, WelchConfig};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HrvConfig {
    /// Divisor `n - ddof` for every standard deviation.
    pub ddof: usize,
    pub segment_s: f64,
    pub histogram_bin_ms: f64,
    pub tachogram_fs: f64,
    pub welch: WelchConfig,
    pub min_spectral_s: f64,
    pub lf_band: [f64; 2],
    pub hf_band: [f64; 2],
}

impl Default for HrvConfig {
    fn default() -> Self {
        HrvConfig {
            ddof: 0,
            segment_s: 300.0,
            histogram_bin_ms: 7.8125,
            tachogram_fs: 4.0,
            welch: WelchConfig { segment_len: 256, overlap: 128 },
            min_spectral_s: 300.0,
            lf_band: [0.04, 0.15],
            hf_band: [0.15, 0.4],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeDomain {
    pub sdnn: Option<f64>,
    pub sdann: Option<f64>,
    pub sdann_index: Option<f64>,
    pub rmssd: Option<f64>,
    pub pnn50: Option<f64>,
    pub triangular_index: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDomain {
    pub lf: Option<f64>,
    pub hf: Option<f64>,
    pub lf_nu: Option<f64>,
    pub hf_nu: Option<f64>,
    pub lf_hf: Option<f64>,
}

/// Successive differences between adjacent valid intervals.
pub fn successive_differences(rr: &RrSeries) -> Vec<f64> {
    (1..rr.len())
        .filter(|&i| rr.is_valid(i - 1) && rr.is_valid(i))
        .map(|i| rr.rr_ms[i] - rr.rr_ms[i - 1])
        .collect()
}

pub fn hrv_time(rr: &RrSeries, cfg: &HrvConfig) -> TimeDomain {
    let nn = rr.valid_rr();
    let mut out = TimeDomain::default();
    if nn.len() >= 2 {
        out.sdnn = stats::std_dev(&nn, cfg.ddof);
        let mut counts = std::collections::HashMap::new();
        for v in &nn {
            *counts.entry((v / cfg.histogram_bin_ms).floor() as i64).or_insert(0usize) += 1;
        }
        let peak = counts.values().copied().max().unwrap_or(1);
        out.triangular_index = Some(nn.len() as f64 / peak as f64);
    }
    let diffs = successive_differences(rr);
    if !diffs.is_empty() {
        let ms = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
        out.rmssd = Some(ms.sqrt());
        let big = diffs.iter().filter(|d| d.abs() > 50.0).count();
        out.pnn50 = Some(100.0 * big as f64 / diffs.len() as f64);
    }

    // Complete segments measured from the first beat.
    if let (Some(&t0), Some(&t_end)) = (rr.beat_times.first(), rr.beat_times.last()) {
        let n_seg = ((t_end - t0) / cfg.segment_s + 1e-9).floor() as usize;
        let mut segs: Vec<Vec<f64>> = vec![Vec::new(); n_seg];
        for i in (0..rr.len()).filter(|&i| rr.is_valid(i)) {
            // Midpoints never sit on a beat-aligned boundary.
            let mid = 0.5 * (rr.beat_times[i] + rr.beat_times[i + 1]);
            let k = ((mid - t0) / cfg.segment_s).floor() as usize;
            if k < n_seg {
                segs[k].push(rr.rr_ms[i]);
            }
        }
        let filled: Vec<&Vec<f64>> = segs.iter().filter(|s| !s.is_empty()).collect();
        if filled.len() >= 2 {
            let means: Vec<f64> = filled.iter().map(|s| stats::mean(s).unwrap()).collect();
            out.sdann = stats::std_dev(&means, cfg.ddof);
            let sds: Vec<f64> = filled.iter().filter_map(|s| stats::std_dev(s, cfg.ddof)).collect();
            out.sdann_index = stats::mean(&sds);
        }
    }
    out
}

/// Evenly resampled, linearly detrended tachogram of the valid intervals
/// (ms), placed at the time of the closing beat.
pub fn tachogram(rr: &RrSeries, fs: f64) -> Vec<f64> {
    let pts: Vec<(f64, f64)> =
        (0..rr.len()).filter(|&i| rr.is_valid(i)).map(|i| (rr.end_time(i), rr.rr_ms[i])).collect();
    if pts.len() < 2 {
        return Vec::new();
    }
    let (t0, t1) = (pts[0].0, pts[pts.len() - 1].0);
    let n = ((t1 - t0) * fs).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let t = t0 + k as f64 / fs;
        while j + 2 < pts.len() && pts[j + 1].0 < t {
            j += 1;
        }
        let (a, b) = (pts[j], pts[j + 1]);
        let f = ((t - a.0) / (b.0 - a.0)).clamp(0.0, 1.0);
        out.push(a.1 + f * (b.1 - a.1));
    }
    remove_baseline(&out, 1)
}

/// Band power below which the spectrum is treated as empty (ms²); far under
/// any physiological value, above detrending round-off.
const POWER_FLOOR: f64 = 1e-9;

pub fn hrv_freq(rr: &RrSeries, cfg: &HrvConfig) -> FrequencyDomain {
    let covered: f64 = rr.valid_rr().iter().sum::<f64>() / 1000.0;
    if covered < cfg.min_spectral_s {
        return FrequencyDomain::default();
    }
    let x = tachogram(rr, cfg.tachogram_fs);
    let Ok(psd) = welch_psd(&x, cfg.tachogram_fs, &cfg.welch) else {
        return FrequencyDomain::default();
    };
    let band = |b: [f64; 2]| -> f64 {
        psd.freqs
            .iter()
            .zip(&psd.power)
            .filter(|(f, _)| **f >= b[0] && **f < b[1])
            .map(|(_, p)| p * psd.resolution)
            .sum()
    };
    let (mut lf, mut hf) = (band(cfg.lf_band), band(cfg.hf_band));
    if lf + hf < POWER_FLOOR {
        lf = 0.0;
        hf = 0.0;
    }
    let total = lf + hf;
    FrequencyDomain {
        lf: Some(lf),
        hf: Some(hf),
        lf_nu: (total > 0.0).then(|| 100.0 * lf / total),
        hf_nu: (total > 0.0).then(|| 100.0 * hf / total),
        lf_hf: (hf > 0.0).then(|| lf / hf),
    }
}
