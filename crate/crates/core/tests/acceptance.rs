//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p ecgsleep-core --test acceptance -- --nocapture`.
//!
//! A criterion that cannot be met as stated is still checked as stated and
//! printed as FAIL; the test only errors on failures not listed in `KNOWN`.

mod common;

use std::time::{Duration, Instant};

use common::*;
use ecgsleep_core::assoc::{
    compare_groups, format_p, pearson_regression, psqi_normalize, wake_probability, TestKind,
};
use ecgsleep_core::dsp::{bandpass, butter_bandpass, response};
use ecgsleep_core::eval::{binary_metrics, bootstrap_ci, threshold_grid, threshold_search, ConfusionMatrix};
use ecgsleep_core::features::{wavedec, waverec, welch_psd, WelchConfig};
use ecgsleep_core::holter::{
    attribute, cardiac_metrics, detect_rpeaks, hrv_freq, hrv_time, Beat, BeatLabel, DetectorConfig, HolterConfig,
    HrvConfig, RrConfig, RrSeries, HOLTER_KEYS,
};
use ecgsleep_core::model::{
    accuracy, collapse_classes, collapse_labels, loss_sleep, softmax, softmax_ce_grad, train, Architecture,
    Classifier, Dataset, Granularity, Optimizer, ProbabilityMatrix, TrainConfig, Windows,
};
use ecgsleep_core::pipeline::{run_recording, write_report, PipelineConfig, RecordingInputs, RunContext};
use ecgsleep_core::sleepmetrics::{sleep_metrics, OdiConfig, SleepInputs, SLEEP_KEYS};
use ecgsleep_core::synth::{render_ecg, synth_recording, SynthConfig};
use ecgsleep_core::Stage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Check names expected to fail, with the reason printed next to them.
const KNOWN: &[(&str, &str)] = &[(
    "worked example SE = 70.0",
    "6 of 10 epochs are sleep, so SE = 60.0 under the TST/TIB definition",
)];

#[derive(Default)]
struct Checks {
    n: usize,
    failed: Vec<String>,
}

impl Checks {
    fn check(&mut self, name: &str, ok: bool, detail: impl FnOnce() -> String) {
        self.n += 1;
        if !ok {
            self.failed.push(format!("{name}: {}", detail()));
        }
    }

    fn unknown_failures(&self) -> Vec<&String> {
        self.failed.iter().filter(|f| !KNOWN.iter().any(|(k, _)| f.starts_with(k))).collect()
    }
}

struct Outcome {
    line: String,
    unexpected: Vec<String>,
}

fn criterion(name: &str, limit: Option<Duration>, f: impl FnOnce(&mut Checks)) -> Outcome {
    let t0 = Instant::now();
    let mut c = Checks::default();
    f(&mut c);
    let dt = t0.elapsed();
    if let Some(l) = limit {
        c.check("runtime", dt <= l, || format!("{:.1} s > {:.0} s", dt.as_secs_f64(), l.as_secs_f64()));
    }
    let status = if c.failed.is_empty() { "PASS" } else { "FAIL" };
    let mut line = format!("{status} {name}: {} checks, {:.2} s", c.n, dt.as_secs_f64());
    for f in &c.failed {
        line.push_str(&format!("\n     - {f}"));
        if let Some((_, why)) = KNOWN.iter().find(|(k, _)| f.starts_with(k)) {
            line.push_str(&format!(" [known: {why}]"));
        }
    }
    Outcome { line, unexpected: c.unknown_failures().into_iter().cloned().collect() }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn opt_close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

fn metric_oracle(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let k = rng.gen_range(2..=5);
        let n = rng.gen_range(1..=300);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let pred: Vec<usize> =
            truth.iter().map(|&t| if rng.gen_bool(0.6) { t } else { rng.gen_range(0..k) }).collect();
        let cm = ConfusionMatrix::from_labels(&truth, &pred, k).unwrap();
        let mut counts = vec![vec![0u64; k]; k];
        for (&t, &p) in truth.iter().zip(&pred) {
            counts[t][p] += 1;
        }
        let exact = (0..k).all(|i| (0..k).all(|j| cm.get(i, j) == counts[i][j]));
        c.check("confusion counts", exact, || format!("case {case}"));

        let nf = n as f64;
        let hits = truth.iter().zip(&pred).filter(|(t, p)| t == p).count() as f64;
        c.check("accuracy", (cm.accuracy().unwrap() - hits / nf).abs() <= 1e-12, || format!("case {case}"));

        let pe: f64 = (0..k)
            .map(|cl| {
                let a = truth.iter().filter(|&&t| t == cl).count() as f64;
                let b = pred.iter().filter(|&&p| p == cl).count() as f64;
                a * b
            })
            .sum::<f64>()
            / (nf * nf);
        let kappa = (pe < 1.0).then(|| (hits / nf - pe) / (1.0 - pe));
        c.check("kappa", opt_close(cm.kappa(), kappa, 1e-12), || format!("case {case}: {:?} vs {kappa:?}", cm.kappa()));

        let mut wf1 = 0.0;
        for cl in 0..k {
            let tp = (0..n).filter(|&i| truth[i] == cl && pred[i] == cl).count() as f64;
            let fp = (0..n).filter(|&i| truth[i] != cl && pred[i] == cl).count() as f64;
            let fneg = (0..n).filter(|&i| truth[i] == cl && pred[i] != cl).count() as f64;
            let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let recall = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            wf1 += f1 * (tp + fneg) / nf;
        }
        c.check("weighted F1", (cm.weighted_f1().unwrap() - wf1).abs() <= 1e-12, || format!("case {case}"));

        // Binary scores on a coarse grid so that ties occur.
        let m = rng.gen_range(1..=200);
        let bt: Vec<bool> = (0..m).map(|_| rng.gen_bool(0.4)).collect();
        let bs: Vec<f64> = bt
            .iter()
            .map(|&t| {
                let shift = if t { 4 } else { 0 };
                (rng.gen_range(0..=16) + shift).min(20) as f64 / 20.0
            })
            .collect();
        let thr = rng.gen_range(1..20) as f64 / 20.0;
        let bm = binary_metrics(&bt, &bs, thr).unwrap();
        let (mut tp, mut fp, mut tn, mut fneg) = (0u64, 0u64, 0u64, 0u64);
        for (&t, &s) in bt.iter().zip(&bs) {
            let yes = s >= thr;
            match (t, yes) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fneg += 1,
            }
        }
        c.check("binary counts", (bm.tp, bm.fp, bm.tn, bm.fn_) == (tp, fp, tn, fneg), || format!("case {case}"));
        let ratio = |a: u64, b: u64| (a + b > 0).then(|| a as f64 / (a + b) as f64);
        let (p, r) = (ratio(tp, fp), ratio(tp, fneg));
        let f1 = match (p, r) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => (tp + fp + fneg > 0).then_some(0.0),
        };
        c.check("precision", opt_close(bm.precision, p, 1e-12), || format!("case {case}"));
        c.check("recall", opt_close(bm.recall, r, 1e-12), || format!("case {case}"));
        c.check("specificity", opt_close(bm.specificity, ratio(tn, fp), 1e-12), || format!("case {case}"));
        c.check("binary F1", opt_close(bm.f1, f1, 1e-12), || format!("case {case}: {:?} vs {f1:?}", bm.f1));
        c.check("binary accuracy", (bm.accuracy - (tp + tn) as f64 / m as f64).abs() <= 1e-12, || format!("case {case}"));
        c.check("AUC", opt_close(bm.auc, auc_oracle(&bt, &bs), 1e-12), || {
            format!("case {case}: {:?} vs {:?}", bm.auc, auc_oracle(&bt, &bs))
        });
    }
}

fn random_stage(rng: &mut ChaCha8Rng) -> Stage {
    Stage::from_index(rng.gen_range(0..5)).unwrap()
}

fn sleep_oracle(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let odi = OdiConfig::default();
    for case in 0..10_000 {
        let n = rng.gen_range(1..=120);
        let p_wake = rng.gen_range(0.0..1.0);
        let stages: Vec<Stage> =
            (0..n).map(|_| if rng.gen_bool(p_wake) { Stage::W } else { random_stage(&mut rng) }).collect();
        let arousal: Vec<u8> = (0..n).map(|_| rng.gen_bool(0.1) as u8).collect();
        let respiratory: Vec<u8> = (0..n).map(|_| rng.gen_bool(0.15) as u8).collect();
        // SpO2 on one hypnogram in twenty keeps the naive baseline cheap.
        let spo2: Option<Vec<f64>> = (case % 20 == 0).then(|| {
            let mut x = vec![96.0; n * 30];
            let mut t = 20;
            while t + 40 < x.len() {
                let depth = rng.gen_range(1.0..6.0f64).round();
                let len = rng.gen_range(5..30);
                for v in &mut x[t..t + len] {
                    *v = 96.0 - depth;
                }
                t += len + rng.gen_range(10..200);
            }
            x
        });
        let m = sleep_metrics(
            &SleepInputs {
                stages: &stages,
                arousal: &arousal,
                respiratory: &respiratory,
                spo2: spo2.as_deref().map(|x| (x, 1.0)),
            },
            &odi,
        )
        .unwrap();
        let h = hypnogram_oracle(&stages);
        let tst = h[1];
        let mut want: Vec<Option<f64>> = h.iter().map(|v| Some(*v)).collect();
        want.push(per_hour(respiratory.iter().filter(|v| **v > 0).count(), tst));
        want.push(per_hour(arousal.iter().filter(|v| **v > 0).count(), tst));
        match &spo2 {
            Some(x) => {
                for d in [3.0, 4.0] {
                    want.push(per_hour(desaturation_oracle(x, 1.0, d, 120.0, 10.0), tst));
                }
            }
            None => want.extend([None, None]),
        }
        for ((key, got), want) in m.entries().iter().zip(&want) {
            // Exact: every quantity is a count of half-minute epochs.
            let same = match (got, want) {
                (Some(a), Some(b)) => a.to_bits() == b.to_bits(),
                (None, None) => true,
                _ => false,
            };
            c.check(key, same, || format!("case {case}: {got:?} vs {want:?} for {stages:?}"));
        }
    }
    c.check("16 keys", m_keys() == 16, || "key count".into());

    use Stage::*;
    let m = ecgsleep_core::sleepmetrics::hypnogram_metrics(&[W, W, N1, N2, N2, N3, Rem, W, N2, W]).unwrap();
    c.check("worked example SE = 70.0", m.se == 70.0, || format!("got {}", m.se));
    c.check("worked example SL = 1.0", m.sl == 1.0, || format!("got {}", m.sl));
    c.check("worked example WASO = 0.5", m.waso == 0.5, || format!("got {}", m.waso));
}

fn m_keys() -> usize {
    SLEEP_KEYS.len()
}

fn gaussian_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn tone_amplitude(x: &[f64], f: f64, fs: f64) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let ph = std::f64::consts::TAU * f * i as f64 / fs;
        c += v * ph.cos();
        s += v * ph.sin();
    }
    2.0 * (c * c + s * s).sqrt() / x.len() as f64
}

fn direct_welch(x: &[f64], fs: f64, n: usize, step: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2)).collect();
    let wss: f64 = w.iter().map(|v| v * v).sum();
    let n_seg = (x.len() - n) / step + 1;
    let mut p = vec![0.0; n / 2 + 1];
    for s in 0..n_seg {
        let seg = &x[s * step..s * step + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for (k, pk) in p.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in seg.iter().enumerate() {
                let ph = -std::f64::consts::TAU * (k * j) as f64 / n as f64;
                re += (v - mean) * w[j] * ph.cos();
                im += (v - mean) * w[j] * ph.sin();
            }
            let fold = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            *pk += fold * (re * re + im * im) / (fs * wss) / n_seg as f64;
        }
    }
    p
}

fn dsp_suite(c: &mut Checks) {
    use std::f64::consts::TAU;
    let fs = 100.0;
    let sos = butter_bandpass(4, 0.5, 40.0, fs).unwrap();
    // Zero-phase filtering squares the single-pass magnitude.
    let gain_db = |sos: &[_], f: f64, fs: f64| 20.0 * response(sos, TAU * f / fs).norm().powi(2).log10();
    let dc = gain_db(&sos, 0.0, fs);
    c.check("DC attenuation >= 40 dB", dc <= -40.0, || format!("{dc} dB"));
    let g10 = gain_db(&sos, 10.0, fs);
    c.check("10 Hz loss < 1 dB", g10 > -1.0, || format!("{g10} dB"));
    let sos250 = butter_bandpass(4, 0.5, 40.0, 250.0).unwrap();
    let g60 = gain_db(&sos250, 60.0, 250.0);
    c.check("60 Hz < -20 dB", g60 < -20.0, || format!("{g60} dB"));

    // The same targets measured on filtered signals.
    let x: Vec<f64> = (0..6000).map(|i| 1.0 + (TAU * 10.0 * i as f64 / fs).sin()).collect();
    let y = bandpass(&x, 0.5, 40.0, 4, fs).unwrap();
    let mid = &y[1000..5000];
    let mean = mid.iter().sum::<f64>() / mid.len() as f64;
    c.check("filtered DC residual <= 1%", mean.abs() <= 0.01, || format!("{mean}"));
    let a10 = tone_amplitude(mid, 10.0, fs);
    c.check("filtered 10 Hz within 1 dB", 20.0 * a10.log10() > -1.0, || format!("{a10}"));
    let x60: Vec<f64> = (0..15000).map(|i| (TAU * 60.0 * i as f64 / 250.0).sin()).collect();
    let y60 = bandpass(&x60, 0.5, 40.0, 4, 250.0).unwrap();
    let a60 = tone_amplitude(&y60[2500..12500], 60.0, 250.0);
    c.check("filtered 60 Hz below -20 dB", 20.0 * a60.log10() < -20.0, || format!("{a60}"));

    for seed in 0..3 {
        let x = gaussian_noise(3000, seed);
        let fast = welch_psd(&x, fs, &WelchConfig::default()).unwrap();
        let slow = direct_welch(&x, fs, 256, 128);
        let worst = fast.power.iter().zip(&slow).map(|(a, b)| rel_err(*a, *b)).fold(0.0, f64::max);
        c.check("Welch vs direct DFT", worst <= 1e-9, || format!("relative error {worst:e}"));
    }

    for len in [3000, 2999, 1024] {
        let x = gaussian_noise(len, len as u64);
        let coeffs = wavedec(&x, 4);
        let back = waverec(&coeffs);
        let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let worst = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        c.check("DWT reconstruction", back.len() >= len && worst <= 1e-8, || format!("len {len}: {worst:e}"));
    }
    let mut impulse = vec![0.0; 3000];
    impulse[1500] = 1.0;
    let energy: f64 = wavedec(&impulse, 4).iter().flatten().map(|v| v * v).sum();
    c.check("impulse energy within 2%", (energy - 1.0).abs() <= 0.02, || format!("{energy}"));

    let a = 3.7;
    let x = gaussian_noise(3000, 11);
    let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
    let (y, ay) = (bandpass(&x, 0.5, 40.0, 4, fs).unwrap(), bandpass(&ax, 0.5, 40.0, 4, fs).unwrap());
    let worst = y.iter().zip(&ay).map(|(u, v)| (a * u - v).abs()).fold(0.0, f64::max);
    c.check("bandpass homogeneity", worst <= 1e-8 * a, || format!("{worst:e}"));
    let (w, aw) = (wavedec(&x, 4), wavedec(&ax, 4));
    let worst = w.iter().flatten().zip(aw.iter().flatten()).map(|(u, v)| (a * u - v).abs()).fold(0.0, f64::max);
    c.check("DWT homogeneity", worst <= 1e-8 * a, || format!("{worst:e}"));
    let (p, ap) = (
        welch_psd(&x, fs, &WelchConfig::default()).unwrap(),
        welch_psd(&ax, fs, &WelchConfig::default()).unwrap(),
    );
    let worst = p.power.iter().zip(&ap.power).map(|(u, v)| rel_err(*v, a * a * u)).fold(0.0, f64::max);
    c.check("PSD scales with a^2", worst <= 1e-8, || format!("{worst:e}"));
}

fn separable(n_per: usize, dim: usize, seed: u64) -> (Windows, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..5 * n_per {
        let k = i % 5;
        let row: Vec<f64> = (0..dim).map(|d| if d == k { 3.0 } else { 0.0 } + noise.sample(&mut rng)).collect();
        rows.push(row);
        labels.push(k);
    }
    (Windows::from_rows(&rows).unwrap(), labels)
}

fn model_suite(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-6;
    for _ in 0..200 {
        let z: Vec<f64> = (0..5).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let y = rng.gen_range(0..5);
        let g = softmax_ce_grad(&z, y);
        for j in 0..5 {
            let (mut up, mut dn) = (z.clone(), z.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (loss_sleep(&softmax(&up), y) - loss_sleep(&softmax(&dn), y)) / (2.0 * h);
            c.check("softmax CE gradient", (g[j] - fd).abs() <= 1e-6, || format!("{} vs {fd}", g[j]));
        }
    }

    // Backpropagated network gradient, read off one plain SGD step on a
    // single sample (the step is exactly -lr * gradient).
    let arch = Architecture { input_dim: 6, hidden: vec![8], heads: vec![3, 2] };
    let clf = Classifier::new(arch, 9).unwrap();
    let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels = [2usize, 1];
    let xw = Windows::from_rows(std::slice::from_ref(&x)).unwrap();
    let lr = 1e-4;
    let cfg = TrainConfig { learning_rate: lr, max_passes: 1, batch_size: 0, seed: 0, patience: 0, optimizer: Optimizer::Sgd };
    let (l0, l1) = ([labels[0]], [labels[1]]);
    let data = Dataset { x: &xw, labels: vec![&l0, &l1] };
    let (stepped, report) = train(clf.clone(), &data, None, &cfg).unwrap();
    c.check("SGD step taken", report.best_pass == 1, || "loss did not decrease".into());
    let mut worst = 0.0f64;
    let mut probe = clf.clone();
    for (t, tensor) in clf.tensors().iter().enumerate() {
        for i in 0..tensor.len() {
            let w0 = tensor[i];
            probe.tensors_mut()[t][i] = w0 + 1e-5;
            let up = probe.sample_loss(&x, &labels);
            probe.tensors_mut()[t][i] = w0 - 1e-5;
            let dn = probe.sample_loss(&x, &labels);
            probe.tensors_mut()[t][i] = w0;
            let fd = (up - dn) / 2e-5;
            let bp = (w0 - stepped.tensors()[t][i]) / lr;
            worst = worst.max((fd - bp).abs() / fd.abs().max(1.0));
        }
    }
    c.check("network gradient vs central differences", worst <= 1e-6, || format!("{worst:e}"));

    let (xs, ys) = separable(60, 10, 3);
    let cfg = TrainConfig { learning_rate: 1e-2, max_passes: 30, batch_size: 32, seed: 4, patience: 0, optimizer: Optimizer::Adam };
    let fit = || {
        let mut clf = Classifier::new(Architecture { input_dim: 10, hidden: vec![16], heads: vec![5] }, 1).unwrap();
        clf.fit_normalization(&xs);
        train(clf, &Dataset { x: &xs, labels: vec![&ys] }, None, &cfg).unwrap().0
    };
    let (a, b) = (fit(), fit());
    let bits = |c: &Classifier| c.tensors().iter().flat_map(|t| t.iter().map(|v| v.to_bits())).collect::<Vec<_>>();
    c.check("same-seed training bit-identical", bits(&a) == bits(&b), || "parameters differ".into());
    let acc = accuracy(&a, &xs, &ys, 0);
    c.check("separable cohort train accuracy >= 0.99", acc >= 0.99, || format!("{acc}"));

    for _ in 0..200 {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                let r: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            })
            .collect();
        let p = ProbabilityMatrix::from_rows(&rows).unwrap();
        for g in Granularity::ALL {
            let q = collapse_classes(&p, g).unwrap();
            let worst = p.rows().zip(q.rows()).map(|(a, b)| (a.iter().sum::<f64>() - b.iter().sum::<f64>()).abs()).fold(0.0, f64::max);
            c.check("collapse preserves row sums", worst <= 1e-9, || format!("{g:?}: {worst:e}"));
        }
    }
    use Stage::*;
    let all = [W, N1, N2, N3, Rem];
    let expected: [(Granularity, [usize; 5]); 4] = [
        (Granularity::Five, [0, 1, 2, 3, 4]),
        (Granularity::Four, [0, 1, 1, 2, 3]),
        (Granularity::Three, [0, 1, 1, 1, 2]),
        (Granularity::Two, [0, 1, 1, 1, 1]),
    ];
    for (g, want) in expected {
        c.check("granularity partition", collapse_labels(&all, g) == want, || format!("{g:?}"));
    }
}

fn eval_suite(c: &mut Checks) {
    let g = threshold_grid();
    c.check("grid has 100 candidates", g.len() == 100, || format!("{}", g.len()));
    c.check("grid spans [0.01, 0.99]", g[0] == 0.01 && g[99] == 0.99, || format!("{} .. {}", g[0], g[99]));
    let oracle: Vec<f64> = (0..100).map(|i| 0.01 + 0.98 * i as f64 / 99.0).collect();
    let worst = g.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    c.check("grid matches oracle", worst <= 1e-12, || format!("{worst:e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..300 {
        let n = rng.gen_range(2..200);
        let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        if !truth.iter().any(|t| *t) {
            continue;
        }
        let scores: Vec<f64> =
            truth.iter().map(|&t| (rng.gen_range(0.0..0.8) + if t { 0.2 } else { 0.0 }) as f64).collect();
        let got = threshold_search(&truth, &scores).unwrap();
        let mut best = (f64::NAN, -1.0);
        for &t in &oracle {
            let tp = (0..n).filter(|&i| truth[i] && scores[i] >= t).count() as f64;
            let fp = (0..n).filter(|&i| !truth[i] && scores[i] >= t).count() as f64;
            let fneg = (0..n).filter(|&i| truth[i] && scores[i] < t).count() as f64;
            let f1 = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fneg) } else { 0.0 };
            if f1 > best.1 {
                best = (t, f1);
            }
        }
        let same = (got.threshold - best.0).abs() <= 1e-12 && (got.f1 - best.1).abs() <= 1e-12;
        c.check("threshold search vs grid oracle", same, || format!("case {case}: {got:?} vs {best:?}"));
    }

    let n = 1000;
    let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let coin: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let acc = |idx: &[usize]| Some(idx.iter().filter(|&&i| truth[i] == coin[i]).count() as f64 / idx.len() as f64);
    let a = bootstrap_ci(n, 1000, 77, acc).unwrap();
    let b = bootstrap_ci(n, 1000, 77, acc).unwrap();
    c.check("bootstrap seed-deterministic", a == b, || "two runs differ".into());
    let other = bootstrap_ci(n, 1000, 78, acc).unwrap();
    c.check("bootstrap depends on seed", other != a, || "seed ignored".into());
    c.check("coin accuracy CI contains 0.5", a.ci_low <= 0.5 && 0.5 <= a.ci_high, || {
        format!("[{}, {}]", a.ci_low, a.ci_high)
    });
    let k = bootstrap_ci(n, 1000, 3, |_| Some(0.8)).unwrap();
    c.check("constant metric zero-width CI", k.ci_low == 0.8 && k.ci_high == 0.8, || format!("{k:?}"));
    // The point estimate is a mean of B equal values, exact up to summation round-off.
    c.check("constant metric point", (k.point - 0.8).abs() <= 1e-12, || format!("{k:?}"));
}

fn rr_series(rr_ms: &[f64]) -> RrSeries {
    let mut t = vec![0.0];
    for r in rr_ms {
        t.push(t.last().unwrap() + r / 1000.0);
    }
    RrSeries::from_beats(&t, &RrConfig::default()).unwrap()
}

fn holter_suite(c: &mut Checks) {
    let cfg = HrvConfig::default();
    let flat = hrv_time(&rr_series(&[1000.0; 400]), &cfg);
    c.check("constant RR: SDNN 0", flat.sdnn == Some(0.0), || format!("{:?}", flat.sdnn));
    c.check("constant RR: RMSSD 0", flat.rmssd == Some(0.0), || format!("{:?}", flat.rmssd));
    c.check("constant RR: pNN50 0", flat.pnn50 == Some(0.0), || format!("{:?}", flat.pnn50));

    let alt: Vec<f64> = (0..400).map(|i| if i % 2 == 0 { 800.0 } else { 1000.0 }).collect();
    let t = hrv_time(&rr_series(&alt), &cfg);
    c.check("alternating: RMSSD 200 ms", opt_close(t.rmssd, Some(200.0), 1e-9), || format!("{:?}", t.rmssd));
    c.check("alternating: pNN50 100%", t.pnn50 == Some(100.0), || format!("{:?}", t.pnn50));

    let mut rr = Vec::new();
    let mut now = 0.0;
    while now < 900.0 {
        let v = 1000.0 + 60.0 * (std::f64::consts::TAU * 0.1 * now).sin();
        rr.push(v);
        now += v / 1000.0;
    }
    let f = hrv_freq(&rr_series(&rr), &cfg);
    c.check("0.1 Hz modulation: LFnu > 90", f.lf_nu.is_some_and(|v| v > 90.0), || format!("{:?}", f.lf_nu));

    let fs = 256.0;
    let beats: Vec<Beat> = (1..300).map(|i| Beat { time: i as f64, label: BeatLabel::Normal }).collect();
    let ecg = render_ecg(&beats, fs, 300 * 256, 0.02, 1);
    let ecg = bandpass(&ecg, 0.5, 40.0, 4, fs).unwrap();
    let found = detect_rpeaks(&ecg, fs, &DetectorConfig::default());
    let hit = beats.iter().filter(|b| found.iter().any(|t| (t - b.time).abs() <= 0.05)).count();
    let recall = hit as f64 / beats.len() as f64;
    c.check("60 bpm train: recall >= 0.99", recall >= 0.99, || format!("{recall}"));

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let alphabet = ['N', 'N', 'N', 'V', 'S', 'Q'];
    for case in 0..1000 {
        let len = rng.gen_range(0..120);
        let s: String = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        let labels: Vec<BeatLabel> = s.chars().map(|ch| BeatLabel::parse(&ch.to_string())).collect();
        for (class, code) in [(BeatLabel::Pvc, 'V'), (BeatLabel::Pac, 'S')] {
            let (attr, counts) = attribute(&labels, class);
            let o = ectopy_oracle(&s, code);
            let got = [counts.total, counts.single, counts.paired, counts.bigeminy, counts.triad, counts.long_runs];
            c.check("pattern counts vs oracle", got == o, || format!("case {case} '{s}': {got:?} vs {o:?}"));
            let every_once = labels.iter().zip(&attr).all(|(l, a)| (*l == class) == a.is_some());
            c.check("each ectopic beat in exactly one pattern", every_once, || format!("case {case} '{s}'"));
        }
    }
}

fn association_suite(c: &mut Checks) {
    let p = ProbabilityMatrix::from_rows(&[
        vec![0.2, 0.2, 0.2, 0.2, 0.2],
        vec![0.4, 0.15, 0.15, 0.15, 0.15],
        vec![0.6, 0.1, 0.1, 0.1, 0.1],
    ])
    .unwrap();
    let w = wake_probability(&p).unwrap();
    c.check("wake column [0.2, 0.4, 0.6] -> 0.4", (w - 0.4).abs() <= 1e-12, || format!("{w}"));
    c.check("PSQI 21 -> 1.0", psqi_normalize(21).unwrap() == 1.0, || "".into());
    let x: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let r = pearson_regression("y", &x, &y).unwrap();
    c.check("y = 2x: r = 1", (r.r - 1.0).abs() <= 1e-12, || format!("{}", r.r));
    c.check("y = 2x: slope 2", (r.slope - 2.0).abs() <= 1e-12, || format!("{}", r.slope));

    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..20 {
        let a: Vec<f64> = (0..25).map(|_| noise.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..25).map(|_| 6.0 + noise.sample(&mut rng)).collect();
        let cmp = compare_groups("m", &a, &b, TestKind::default()).unwrap();
        c.check("shifted groups p < 0.001", cmp.p_value.is_some_and(|p| p < 0.001), || {
            format!("trial {trial}: {:?}", cmp.p_value)
        });
        c.check("shifted groups print <0.001", cmp.p_display == "<0.001", || cmp.p_display.clone());
    }
    c.check("default test is Mann-Whitney", TestKind::default() == TestKind::MannWhitney, || "".into());
    for (p, want) in [(0.0004, "<0.001"), (0.000999, "<0.001"), (0.001, "0.001"), (0.047, "0.047"), (0.05, "0.050"), (0.61, "0.610"), (1.0, "1.000")] {
        let got = format_p(p);
        c.check("p formatting", got == want, || format!("{p}: '{got}' vs '{want}'"));
    }
}

fn end_to_end(c: &mut Checks) {
    let rec = synth_recording(&SynthConfig::default());
    let inputs = RecordingInputs {
        id: "synthetic-night".into(),
        edf: rec.edf.to_bytes(),
        annotations: Some(rec.annotations_xml.clone()),
        beats: Some(rec.beats_text()),
        probabilities: None,
    };
    let cfg = PipelineConfig::default();
    let ctx = RunContext::new(cfg.clone()).unwrap();
    let report = run_recording(&inputs, &ctx);
    let dir = tempfile::tempdir().unwrap();
    let written = write_report(&report, dir.path(), true);
    c.check("report written and schema-valid", written.is_ok(), || format!("{written:?}"));
    c.check("no stage errors", report.errors.is_empty(), || format!("{:?}", report.errors));

    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    for k in SLEEP_KEYS {
        c.check("sleep key present", json["sleep_metrics"][k].is_number(), || k.to_string());
    }
    for k in HOLTER_KEYS {
        c.check("cardiac key present", json["cardiac_metrics"][k].is_number(), || k.to_string());
    }

    // Analysed window: the recording minus one hour at each end.
    let trim = cfg.input.trim_epochs;
    let n_full = rec.truth.stages.len();
    let (t0, t1) = ((trim * 30) as f64, ((n_full - trim) * 30) as f64);
    let stages = &rec.truth.stages[trim..n_full - trim];
    c.check("hypnogram equals scored stages", report.hypnogram == stages, || "differs".into());

    let Some(sm) = report.sleep_metrics.clone() else {
        c.check("sleep metrics present", false, || "missing".into());
        return;
    };
    let h = hypnogram_oracle(stages);
    let tst = h[1];
    let in_win = |e: &&usize| (trim..n_full - trim).contains(*e);
    let resp = rec.truth.respiratory_epochs.iter().filter(in_win).count();
    let arou = rec.truth.arousal_epochs.iter().filter(in_win).count();
    let dips = |d: f64| rec.truth.desaturations.iter().filter(|(s, depth)| *s >= t0 && *s < t1 && *depth >= d).count();
    let mut want: Vec<Option<f64>> = h.iter().map(|v| Some(*v)).collect();
    want.extend([per_hour(resp, tst), per_hour(arou, tst), per_hour(dips(3.0), tst), per_hour(dips(4.0), tst)]);
    for ((k, got), want) in sm.entries().iter().zip(&want) {
        c.check("sleep metric vs ground truth", opt_close(*got, *want, 1e-9), || format!("{k}: {got:?} vs {want:?}"));
    }

    let cm = report.cardiac_metrics.clone().unwrap_or_default();
    let planted: Vec<&String> = rec.truth.ectopy.iter().filter(|(t, _)| *t >= t0 && *t < t1).map(|(_, s)| s).collect();
    for (prefix, code) in [("PVC", 'V'), ("PAC", 'S')] {
        let mut sum = [0usize; 6];
        for s in &planted {
            for (a, b) in sum.iter_mut().zip(ectopy_oracle(s, code)) {
                *a += b;
            }
        }
        for (i, key) in ["Total", "Single", "Paired", "Bigeminy", "Triad"].iter().enumerate() {
            let k = format!("{key}_{prefix}");
            c.check("ectopy count", cm.get(&k) == Some(sum[i] as f64), || format!("{k}: {:?} vs {}", cm.get(&k), sum[i]));
        }
        let runs_key = if code == 'V' { "Total_VT" } else { "Total_SVT" };
        let runs = (sum[4] + sum[5]) as f64;
        c.check("tachy runs", cm.get(runs_key) == Some(runs), || format!("{runs_key}: {:?} vs {runs}", cm.get(runs_key)));
    }
    let af: f64 = rec.truth.beats.episodes.iter().map(|e| (e.end.min(t1) - e.start.max(t0)).max(0.0)).sum::<f64>() / 60.0;
    c.check("AF duration", opt_close(cm.get("AF_duration"), Some(af), 1e-9), || format!("{:?} vs {af}", cm.get("AF_duration")));

    // Planted rate blocks: 128- and 300-sample intervals at 256 Hz.
    c.check("Max_HR near 120 bpm", opt_close(cm.get("Max_HR"), Some(120.0), 1.0), || format!("{:?}", cm.get("Max_HR")));
    c.check("Min_HR near 51.2 bpm", opt_close(cm.get("Min_HR"), Some(51.2), 1.0), || format!("{:?}", cm.get("Min_HR")));

    // HR and HRV against the same measures on the true beat times.
    let hcfg = HolterConfig::default();
    let ann = rec.truth.beats.window(t0, t1);
    let times: Vec<f64> = ann.beats.iter().map(|b| b.time).collect();
    let mut rr = RrSeries::from_beats(&times, &hcfg.rr).unwrap();
    rr.mark_ectopic(&ann, hcfg.rr.match_tolerance_s);
    let truth = cardiac_metrics(&rr, Some(&ann), t1 - t0, &hcfg).unwrap();
    // Relative tolerances. Beat times are sample-exact, so most measures
    // agree closely; the triangular index moves with histogram bin edges.
    let tolerances: [(&str, f64); 19] = [
        ("Total_valid_beats", 0.002),
        ("Avg_HR", 0.001),
        ("Min_HR", 0.001),
        ("Max_HR", 0.001),
        ("Snt_max_beat_count", 0.02),
        ("Snt_duration", 0.01),
        ("Snb_max_beat_count", 0.02),
        ("Snb_duration", 0.01),
        ("SDNN", 0.001),
        ("SDANN", 0.001),
        ("SDANNIndex", 0.001),
        ("RMSSD", 0.001),
        ("pNN50", 0.02),
        ("HRV_tri", 0.02),
        ("LF", 0.002),
        ("HF", 0.002),
        ("LFNU", 0.002),
        ("HFNU", 0.002),
        ("LF/HF", 0.002),
    ];
    for (k, tol) in tolerances {
        let (g, w) = (cm.get(k), truth.get(k));
        let ok = matches!((g, w), (Some(g), Some(w)) if (g - w).abs() <= tol * w.abs().max(1.0));
        c.check("cardiac metric vs true beats", ok, || format!("{k}: {g:?} vs {w:?} (tol {tol})"));
    }
}

#[test]
fn acceptance() {
    let s = Duration::from_secs;
    let mut outcomes = vec![Outcome {
        line: "N/A  published-result reproduction: needs access-restricted cohorts and full-scale training; \
               acceptance rests on the suites below"
            .into(),
        unexpected: vec![],
    }];
    outcomes.push(criterion("metric-oracle suite (1,000 fuzzed sets)", Some(s(60)), metric_oracle));
    outcomes.push(criterion("sleep-metric oracle (10,000 hypnograms + worked example)", Some(s(30)), sleep_oracle));
    outcomes.push(criterion("DSP/feature suite", Some(s(60)), dsp_suite));
    outcomes.push(criterion("model suite", None, model_suite));
    outcomes.push(criterion("evaluation-protocol suite", Some(s(120)), eval_suite));
    outcomes.push(criterion("HRV/Holter suite", None, holter_suite));
    outcomes.push(criterion("association suite", None, association_suite));
    outcomes.push(criterion("end-to-end synthetic 8-h night", Some(s(60)), end_to_end));
    println!();
    for o in &outcomes {
        println!("{}", o.line);
    }
    let unexpected: Vec<&String> = outcomes.iter().flat_map(|o| &o.unexpected).collect();
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:#?}");
}
