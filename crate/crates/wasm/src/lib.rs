//! Browser bindings for the demo page. Each export returns a JSON string;
//! the `*_json` functions hold the logic and run natively in tests.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ecgsleep_core::dsp::{bandpass, butter_bandpass, response};
use ecgsleep_core::holter::{detect_rpeaks, hrv_time, HolterConfig, RrSeries};
use ecgsleep_core::sleepmetrics::hypnogram_metrics;
use ecgsleep_core::synth::{beat_train, render_ecg};
use ecgsleep_core::Stage;

const DEMO_FS: usize = 256;
/// Samples of filtered ECG returned for plotting.
const PLOT_SECONDS: f64 = 10.0;

/// Synthesise `seconds` of ECG, detect R peaks and summarise the rhythm.
pub fn ecg_demo_json(seconds: f64, seed: u32, noise_mv: f64) -> Result<String, String> {
    if !(10.0..=600.0).contains(&seconds) {
        return Err("duration must be between 10 and 600 s".into());
    }
    if !(0.0..=1.0).contains(&noise_mv) {
        return Err("noise must be between 0 and 1 mV".into());
    }
    let fs = DEMO_FS as f64;
    let n = (seconds * fs) as usize;
    let (beats, _) = beat_train(seconds, DEMO_FS, seed as u64);
    let raw = render_ecg(&beats, fs, n, noise_mv, seed as u64);
    let cfg = HolterConfig::default();
    let x = bandpass(&raw, 0.5, 40.0, 4, fs).map_err(|e| e.to_string())?;
    let peaks = detect_rpeaks(&x, fs, &cfg.detector);

    let truth: Vec<f64> = beats.iter().map(|b| b.time).filter(|t| *t < seconds).collect();
    let tol = 0.075;
    let hits = truth.iter().filter(|t| peaks.iter().any(|p| (p - *t).abs() <= tol)).count();
    let rr = RrSeries::from_beats(&peaks, &cfg.rr).map_err(|e| e.to_string())?;
    let td = hrv_time(&rr, &cfg.hrv);
    let valid = rr.valid_rr();
    let mean_hr = (!valid.is_empty()).then(|| 60_000.0 * valid.len() as f64 / valid.iter().sum::<f64>());

    let m = ((PLOT_SECONDS * fs) as usize).min(n);
    let round = |v: f64| (v * 1e4).round() / 1e4;
    Ok(json!({
        "fs": fs,
        "signal": x[..m].iter().map(|v| round(*v)).collect::<Vec<_>>(),
        "peaks": peaks,
        "true_beats": truth.len(),
        "detected": peaks.len(),
        "recall": if truth.is_empty() { Value::Null } else { json!(hits as f64 / truth.len() as f64) },
        "mean_hr": mean_hr,
        "rr_ms": rr.rr_ms,
        "sdnn": td.sdnn,
        "rmssd": td.rmssd,
        "pnn50": td.pnn50,
    })
    .to_string())
}

/// Sleep metrics of a hypnogram written as stage codes separated by
/// spaces, commas or newlines (`W N1 N2 N3 REM`).
pub fn hypnogram_json(text: &str) -> Result<String, String> {
    let stages: Vec<Stage> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let m = hypnogram_metrics(&stages).map_err(|e| e.to_string())?;
    // Pairs keep the canonical key order.
    let metrics: Vec<Value> = m.entries().iter().map(|(k, v)| json!([k, v])).collect();
    Ok(json!({
        "n_epochs": stages.len(),
        "stages": stages.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        "metrics": metrics,
    })
    .to_string())
}

/// Magnitude response in dB of the zero-phase Butterworth bandpass (the
/// squared single-pass response) at `points` frequencies from 0 to Nyquist.
pub fn filter_response_json(low: f64, high: f64, order: usize, fs: f64, points: usize) -> Result<String, String> {
    if !(2..=4096).contains(&points) {
        return Err("points must be between 2 and 4096".into());
    }
    let sos = butter_bandpass(order, low, high, fs).map_err(|e| e.to_string())?;
    let nyq = fs / 2.0;
    let (freq, db): (Vec<f64>, Vec<f64>) = (0..points)
        .map(|i| {
            let f = nyq * i as f64 / (points - 1) as f64;
            let h = response(&sos, std::f64::consts::TAU * f / fs).norm();
            (f, (40.0 * h.max(1e-12).log10()).max(-400.0))
        })
        .unzip();
    Ok(json!({ "freq": freq, "db": db, "sections": sos.len() }).to_string())
}

#[wasm_bindgen(js_name = ecgDemo)]
pub fn ecg_demo(seconds: f64, seed: u32, noise_mv: f64) -> Result<String, JsError> {
    ecg_demo_json(seconds, seed, noise_mv).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = hypnogramMetrics)]
pub fn hypnogram(text: &str) -> Result<String, JsError> {
    hypnogram_json(text).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = filterResponse)]
pub fn filter_response(low: f64, high: f64, order: usize, fs: f64, points: usize) -> Result<String, JsError> {
    filter_response_json(low, high, order, fs, points).map_err(|e| JsError::new(&e))
}
