//! Synthetic overnight recordings with exactly known content: a scored
//! hypnogram, arousals, respiratory events, SpO2 dips and a labelled beat
//! train rendered into an ECG channel.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::holter::{write_beat_annotations, Beat, BeatAnnotations, BeatLabel, Episode, EpisodeKind};
use crate::ingest::{EdfChannel, EdfFile, EdfHeader};
use crate::{Stage, EPOCH_SECONDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub hours: f64,
    pub ecg_fs: usize,
    pub seed: u64,
    pub noise_mv: f64,
    /// Emit the SpO2 channel.
    pub spo2: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { hours: 8.0, ecg_fs: 256, seed: 1, noise_mv: 0.01, spo2: true }
    }
}

/// What was planted, in recording time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub stages: Vec<Stage>,
    /// Epochs holding exactly one arousal / respiratory event.
    pub arousal_epochs: Vec<usize>,
    pub respiratory_epochs: Vec<usize>,
    /// `(start_s, depth_pct)` of each SpO2 dip.
    pub desaturations: Vec<(f64, f64)>,
    pub beats: BeatAnnotations,
    /// Ectopic label strings planted, e.g. `"VNVNV"`, with their start time.
    pub ectopy: Vec<(f64, String)>,
    /// `[start, end)` of the elevated and lowered rate blocks.
    pub tachycardia: (f64, f64),
    pub bradycardia: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SynthRecording {
    pub edf: EdfFile,
    pub annotations_xml: String,
    pub truth: GroundTruth,
}

impl SynthRecording {
    pub fn beats_text(&self) -> String {
        write_beat_annotations(&self.truth.beats)
    }
}

/// Stage plan `(stage, epochs, scored as stage 4)` for an 8-h night.
const NIGHT: &[(Stage, usize, bool)] = &[
    (Stage::W, 80, false),
    (Stage::N1, 10, false),
    (Stage::N2, 60, false),
    (Stage::N3, 20, false),
    (Stage::N3, 20, true),
    (Stage::N2, 20, false),
    (Stage::Rem, 20, false),
    (Stage::W, 4, false),
    (Stage::N1, 6, false),
    (Stage::N2, 70, false),
    (Stage::N3, 30, true),
    (Stage::N2, 20, false),
    (Stage::Rem, 30, false),
    (Stage::W, 6, false),
    (Stage::N1, 4, false),
    (Stage::N2, 80, false),
    (Stage::N3, 20, false),
    (Stage::N2, 20, false),
    (Stage::Rem, 40, false),
    (Stage::W, 2, false),
    (Stage::N1, 4, false),
    (Stage::N2, 90, false),
    (Stage::N3, 10, false),
    (Stage::Rem, 40, false),
    (Stage::W, 10, false),
    (Stage::N2, 80, false),
    (Stage::Rem, 44, false),
    (Stage::W, 120, false),
];

/// Planned ectopy as `(time_s, labels)`. The first lies in the leading
/// hour, the rest in the analysed window of an 8-h night.
const ECTOPY: &[(f64, &str)] = &[
    (600.0, "V"),
    (3000.0, "V"),
    (4000.0, "V"),
    (5000.0, "V"),
    (6000.0, "V"),
    (7000.0, "V"),
    (8000.0, "VV"),
    (9000.0, "VV"),
    (10000.0, "VNVNV"),
    (11000.0, "VVV"),
    (12000.0, "VVVVV"),
    (13000.0, "S"),
    (14000.0, "S"),
    (15000.0, "S"),
    (16000.0, "S"),
    (17000.0, "SS"),
    (18000.0, "SSS"),
    (19000.0, "SNSNS"),
    (20000.0, "SSSS"),
];

const TACHY: (f64, f64) = (21000.0, 21120.0);
const BRADY: (f64, f64) = (22000.0, 22180.0);
const AF: (f64, f64) = (23000.0, 23360.0);

fn scale_plan(hours: f64) -> Vec<Stage> {
    let n_epochs = (hours * 3600.0 / EPOCH_SECONDS).floor() as usize;
    let mut out: Vec<Stage> = NIGHT.iter().flat_map(|&(s, n, _)| std::iter::repeat(s).take(n)).collect();
    out.resize(n_epochs, Stage::W);
    out
}

/// The planned hypnogram for a night of `hours`.
pub fn hypnogram(hours: f64) -> Vec<Stage> {
    scale_plan(hours)
}

/// Beat times (s) and labels. Rates are whole-sample RR intervals at `fs`
/// so that every beat falls on a sample.
pub fn beat_train(duration_s: f64, fs: usize, seed: u64) -> (Vec<Beat>, Vec<(f64, String)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fsf = fs as f64;
    let base = 240.0 * fsf / 256.0;
    let desired = |t: f64| -> f64 {
        if t >= TACHY.0 && t < TACHY.1 {
            return 128.0 * fsf / 256.0;
        }
        if t >= BRADY.0 && t < BRADY.1 {
            return 300.0 * fsf / 256.0;
        }
        let tau = std::f64::consts::TAU;
        base + fsf / 256.0
            * (10.0 * (tau * t / 3600.0).sin() + 5.0 * (tau * 0.1 * t).sin() + 4.0 * (tau * 0.25 * t).sin())
    };
    let max_step = 6.0 * fsf / 256.0;
    let total = (duration_s * fsf) as i64;
    let mut beats = Vec::new();
    let mut planted = Vec::new();
    let mut plan = ECTOPY.iter().filter(|(t, _)| *t < duration_s - 60.0).peekable();
    let mut pos: i64 = (0.5 * fsf) as i64;
    let mut rr = desired(0.0);
    loop {
        let t = pos as f64 / fsf;
        if pos >= total - fs as i64 {
            break;
        }
        beats.push(Beat { time: t, label: BeatLabel::Normal });
        if let Some(&&(pt, labels)) = plan.peek() {
            if t >= pt {
                plan.next();
                planted.push((t, labels.to_string()));
                let mut prev = BeatLabel::Normal;
                for c in labels.chars() {
                    let label = BeatLabel::parse(&c.to_string());
                    let factor = match (label, prev) {
                        (BeatLabel::Pvc, _) => 0.6,
                        (BeatLabel::Pac, _) => 0.75,
                        (_, BeatLabel::Pvc) => 1.4,
                        _ => 1.0,
                    };
                    pos += (rr * factor).round() as i64;
                    beats.push(Beat { time: pos as f64 / fsf, label });
                    prev = label;
                }
                let factor = if prev == BeatLabel::Pvc { 1.4 } else { 1.0 };
                pos += (rr * factor).round() as i64;
                continue;
            }
        }
        let target = desired(t);
        rr += (target - rr).clamp(-max_step, max_step);
        let mut step = rr.round();
        if t >= AF.0 && t < AF.1 {
            step += rng.gen_range(-20.0..=20.0f64).round() * fsf / 256.0;
            step = step.round();
        }
        pos += step as i64;
    }
    (beats, planted)
}

#[derive(Clone, Copy)]
struct Wave {
    offset: f64,
    sigma: f64,
    amp: f64,
}

const NORMAL_BEAT: [Wave; 5] = [
    Wave { offset: -0.20, sigma: 0.025, amp: 0.12 },
    Wave { offset: -0.03, sigma: 0.010, amp: -0.10 },
    Wave { offset: 0.0, sigma: 0.010, amp: 1.00 },
    Wave { offset: 0.03, sigma: 0.010, amp: -0.20 },
    Wave { offset: 0.28, sigma: 0.045, amp: 0.25 },
];

const PVC_BEAT: [Wave; 5] = [
    Wave { offset: -0.20, sigma: 0.025, amp: 0.0 },
    Wave { offset: -0.04, sigma: 0.020, amp: -0.15 },
    Wave { offset: 0.0, sigma: 0.022, amp: 1.40 },
    Wave { offset: 0.06, sigma: 0.025, amp: -0.30 },
    Wave { offset: 0.30, sigma: 0.060, amp: -0.35 },
];

/// Render a labelled beat train as an ECG in millivolts.
pub fn render_ecg(beats: &[Beat], fs: f64, n_samples: usize, noise_mv: f64, seed: u64) -> Vec<f64> {
    let mut x = vec![0.0; n_samples];
    for b in beats {
        let shape = if b.label == BeatLabel::Pvc { &PVC_BEAT } else { &NORMAL_BEAT };
        for w in shape.iter().filter(|w| w.amp != 0.0) {
            let centre = b.time + w.offset;
            let lo = ((centre - 5.0 * w.sigma) * fs).ceil().max(0.0) as usize;
            let hi = (((centre + 5.0 * w.sigma) * fs).floor() as usize + 1).min(n_samples);
            for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                let d = (i as f64 / fs - centre) / w.sigma;
                *v += w.amp * (-0.5 * d * d).exp();
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let noise = Normal::new(0.0, noise_mv.max(0.0)).expect("finite sd");
    for (i, v) in x.iter_mut().enumerate() {
        let t = i as f64 / fs;
        *v += 0.15 * (std::f64::consts::TAU * 0.2 * t).sin();
        if noise_mv > 0.0 {
            *v += noise.sample(&mut rng);
        }
    }
    x
}

/// 1-Hz SpO2 at 96% with trapezoidal dips (5 s down, 15 s hold, 5 s up).
pub fn render_spo2(n_seconds: usize, dips: &[(f64, f64)]) -> Vec<f64> {
    let mut x = vec![96.0; n_seconds];
    for &(start, depth) in dips {
        for (i, v) in x.iter_mut().enumerate() {
            let t = i as f64 - start;
            let frac = if (0.0..5.0).contains(&t) {
                t / 5.0
            } else if (5.0..20.0).contains(&t) {
                1.0
            } else if (20.0..25.0).contains(&t) {
                (25.0 - t) / 5.0
            } else {
                0.0
            };
            *v -= depth * frac;
        }
    }
    x
}

fn digitize(x: &[f64], pmin: f64, pmax: f64) -> Vec<i16> {
    let gain = 65535.0 / (pmax - pmin);
    x.iter()
        .map(|&v| ((v.clamp(pmin, pmax) - pmin) * gain - 32768.0).round().clamp(-32768.0, 32767.0) as i16)
        .collect()
}

fn channel(label: &str, dim: &str, pmin: f64, pmax: f64, spr: usize) -> EdfChannel {
    EdfChannel {
        label: label.into(),
        transducer: String::new(),
        physical_dim: dim.into(),
        physical_min: pmin,
        physical_max: pmax,
        digital_min: -32768,
        digital_max: 32767,
        prefiltering: String::new(),
        samples_per_record: spr,
        reserved: String::new(),
    }
}

fn stage_concept(s: Stage, n4: bool) -> &'static str {
    match s {
        Stage::W => "Wake|0",
        Stage::N1 => "Stage 1 sleep|1",
        Stage::N2 => "Stage 2 sleep|2",
        Stage::N3 if n4 => "Stage 4 sleep|4",
        Stage::N3 => "Stage 3 sleep|3",
        Stage::Rem => "REM sleep|5",
    }
}

fn event_xml(kind: &str, concept: &str, start: f64, duration: f64) -> String {
    format!(
        "<ScoredEvent><EventType>{kind}</EventType><EventConcept>{concept}</EventConcept>\
         <Start>{start}</Start><Duration>{duration}</Duration></ScoredEvent>\n"
    )
}

/// Every `step`-th sleep epoch from `from`, skipping stage transitions.
fn pick_epochs(stages: &[Stage], from: usize, step: usize, count: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = from;
    while out.len() < count && i + 1 < stages.len() {
        if stages[i].is_sleep() && stages[i - 1] == stages[i] && stages[i + 1] == stages[i] {
            out.push(i);
            i += step;
        } else {
            i += 1;
        }
    }
    out
}

/// Build the full fixture. Nights shorter than 8 h keep the plan prefix.
pub fn synth_recording(cfg: &SynthConfig) -> SynthRecording {
    let duration = (cfg.hours * 3600.0).floor();
    let n_records = duration as usize;
    let fs = cfg.ecg_fs;
    let stages = scale_plan(cfg.hours);

    let (beats, planted) = beat_train(duration, fs, cfg.seed);
    let ecg = render_ecg(&beats, fs as f64, n_records * fs, cfg.noise_mv, cfg.seed);
    let mut episodes = Vec::new();
    if AF.1 < duration {
        episodes.push(Episode { kind: EpisodeKind::Af, start: AF.0, end: AF.1 });
    }

    // One arousal / respiratory event per chosen epoch, a few in the
    // leading hour that trimming removes.
    let mut arousal_epochs = vec![20, 40];
    arousal_epochs.extend(pick_epochs(&stages, 90, 23, 30));
    let mut respiratory_epochs = vec![30, 50];
    respiratory_epochs.extend(pick_epochs(&stages, 95, 17, 40));
    let mut desaturations = vec![(500.0, 5.0), (1200.0, 5.0)];
    let mut t = 2400.0;
    for i in 0..35 {
        if t + 60.0 >= duration - 1800.0 {
            break;
        }
        desaturations.push((t, if i % 7 == 3 || i % 7 == 6 { 3.5 } else { 5.0 }));
        t += 600.0;
    }

    let mut xml = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<PSGAnnotation>\n<ScoredEvents>\n");
    let mut e = 0;
    for &(s, n, n4) in NIGHT {
        let n = n.min(stages.len().saturating_sub(e));
        if n == 0 {
            break;
        }
        xml += &event_xml("Stages|Stages", stage_concept(s, n4), e as f64 * EPOCH_SECONDS, n as f64 * EPOCH_SECONDS);
        e += n;
    }
    let respiratory = ["Obstructive apnea|Obstructive Apnea", "Hypopnea|Hypopnea", "Central apnea|Central Apnea"];
    for (k, &ep) in respiratory_epochs.iter().enumerate() {
        xml += &event_xml("Respiratory|Respiratory", respiratory[k % 3], ep as f64 * EPOCH_SECONDS + 3.0, 20.0);
    }
    for &ep in &arousal_epochs {
        xml += &event_xml("Arousals|Arousals", "Arousal|Arousal ()", ep as f64 * EPOCH_SECONDS + 5.0, 10.0);
    }
    for &(start, _) in &desaturations {
        xml += &event_xml("Respiratory|Respiratory", "SpO2 desaturation|SpO2 desaturation", start, 25.0);
    }
    xml += "</ScoredEvents>\n</PSGAnnotation>\n";

    let mut channels = vec![channel("ECG", "mV", -5.0, 5.0, fs)];
    let mut digital = vec![digitize(&ecg, -5.0, 5.0)];
    if cfg.spo2 {
        channels.push(channel("SaO2", "%", 0.0, 100.0, 1));
        digital.push(digitize(&render_spo2(n_records, &desaturations), 0.0, 100.0));
    }
    let header = EdfHeader {
        version: "0".into(),
        patient_id: "synthetic".into(),
        recording_id: format!("synthetic seed {}", cfg.seed),
        start: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(22, 0, 0).unwrap(),
        reserved: String::new(),
        n_data_records: n_records,
        record_duration: 1.0,
        channels,
    };

    SynthRecording {
        edf: EdfFile { header, digital },
        annotations_xml: xml,
        truth: GroundTruth {
            stages,
            arousal_epochs,
            respiratory_epochs,
            desaturations,
            beats: BeatAnnotations { beats, episodes },
            ectopy: planted,
            tachycardia: TACHY,
            bradycardia: BRADY,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_is_eight_hours() {
        let h = hypnogram(8.0);
        assert_eq!(h.len(), 960);
        assert!(h[..80].iter().all(|s| *s == Stage::W));
        assert!(h[900..].iter().all(|s| *s == Stage::W));
    }

    #[test]
    fn beats_on_samples() {
        let (beats, planted) = beat_train(3600.0, 256, 3);
        assert!(beats.windows(2).all(|w| w[1].time > w[0].time));
        for b in &beats {
            let k = b.time * 256.0;
            assert!((k - k.round()).abs() < 1e-9);
        }
        let ectopic = beats.iter().filter(|b| b.label != BeatLabel::Normal).count();
        // Only the plan entries at 600 s and 3000 s fit in one hour.
        assert_eq!(ectopic, 2);
        assert_eq!(planted.len(), 2);
    }

    #[test]
    fn spo2_dip_shape() {
        let x = render_spo2(100, &[(10.0, 4.0)]);
        assert_eq!(x[9], 96.0);
        assert_eq!(x[15], 92.0);
        assert_eq!(x[29], 92.0);
        assert!((x[31] - (96.0 - 4.0 * 0.8)).abs() < 1e-12);
        assert_eq!(x[35], 96.0);
    }

    #[test]
    fn ecg_peak_at_beats() {
        let beats = [Beat { time: 1.0, label: BeatLabel::Normal }, Beat { time: 2.0, label: BeatLabel::Pvc }];
        let x = render_ecg(&beats, 256.0, 768, 0.0, 0);
        let argmax = |lo: usize, hi: usize| (lo..hi).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap();
        assert_eq!(argmax(200, 300), 256);
        assert_eq!(argmax(450, 600), 512);
    }
}
