//! Brute-force oracles shared by the integration tests. They are written
//! independently of the library code they check.
#![allow(dead_code)]

use ecgsleep_core::Stage;

/// The 12 hypnogram metrics by per-epoch counting, in canonical key order.
pub fn hypnogram_oracle(stages: &[Stage]) -> [f64; 12] {
    let mut tib = 0.0;
    let mut tst = 0.0;
    let mut wake = 0.0;
    let mut by_stage = [0.0f64; 5];
    for s in stages {
        tib += 0.5;
        if *s == Stage::W {
            wake += 0.5;
        } else {
            tst += 0.5;
        }
        let k = match s {
            Stage::W => 0,
            Stage::N1 => 1,
            Stage::N2 => 2,
            Stage::N3 => 3,
            Stage::Rem => 4,
        };
        by_stage[k] += 0.5;
    }
    let mut sl = 0.0;
    let mut seen_sleep = false;
    let mut waso = 0.0;
    let mut pending_wake = 0.0;
    let mut ttsp = 0.0;
    let mut pending_span = 0.0;
    for s in stages {
        let asleep = *s != Stage::W;
        if !seen_sleep {
            if asleep {
                seen_sleep = true;
                ttsp = 0.5;
            } else {
                sl += 0.5;
            }
            continue;
        }
        pending_span += 0.5;
        if asleep {
            waso += pending_wake;
            pending_wake = 0.0;
            ttsp += pending_span;
            pending_span = 0.0;
        } else {
            pending_wake += 0.5;
        }
    }
    let pct = |m: f64| if tst > 0.0 { 100.0 * m / tst } else { 0.0 };
    [
        tib,
        tst,
        100.0 * tst / tib,
        sl,
        waso,
        ttsp,
        100.0 * wake / tib,
        pct(by_stage[1]),
        pct(by_stage[2]),
        pct(by_stage[3]),
        pct(by_stage[1] + by_stage[2] + by_stage[3]),
        pct(by_stage[4]),
    ]
}

/// Events per hour of sleep, `None` without sleep.
pub fn per_hour(count: usize, tst_min: f64) -> Option<f64> {
    (tst_min > 0.0).then(|| count as f64 / (tst_min / 60.0))
}

/// Desaturation count with a brute-force trailing-maximum baseline.
pub fn desaturation_oracle(x: &[f64], fs: f64, drop: f64, window_s: f64, min_s: f64) -> usize {
    let w = (window_s * fs).round() as usize;
    let below: Vec<bool> = (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(w);
            let base = x[lo..=i].iter().copied().fold(f64::MIN, f64::max);
            x[i] <= base - drop
        })
        .collect();
    let mut n = 0;
    let mut run = 0usize;
    for b in below.iter().chain(std::iter::once(&false)) {
        if *b {
            run += 1;
        } else {
            if run > 0 && run as f64 / fs >= min_s {
                n += 1;
            }
            run = 0;
        }
    }
    n
}

/// `(total, single, paired, bigeminy, triad, long runs)` for beats coded
/// `c` in a label string such as `"NVVNS"`.
pub fn ectopy_oracle(s: &str, c: char) -> [usize; 6] {
    let chars: Vec<char> = s.chars().collect();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == c {
            let start = i;
            while i < chars.len() && chars[i] == c {
                i += 1;
            }
            runs.push((start, i - start));
        } else {
            i += 1;
        }
    }
    let total = runs.iter().map(|r| r.1).sum();
    let count_len = |f: &dyn Fn(usize) -> bool| runs.iter().filter(|r| f(r.1)).count();
    let paired = count_len(&|l| l == 2);
    let triad = count_len(&|l| l == 3);
    let long = count_len(&|l| l >= 4);
    // Singles chained by exactly one normal beat form bigeminy when three
    // or more are linked.
    let singles: Vec<usize> = runs.iter().filter(|r| r.1 == 1).map(|r| r.0).collect();
    let mut single = 0;
    let mut bigeminy = 0;
    let mut chain = 1;
    for k in 0..singles.len() {
        let linked = k + 1 < singles.len() && singles[k + 1] == singles[k] + 2 && chars[singles[k] + 1] == 'N';
        if linked {
            chain += 1;
        } else {
            if chain >= 3 {
                bigeminy += 1;
            } else {
                single += chain;
            }
            chain = 1;
        }
    }
    [total, single, paired, bigeminy, triad, long]
}

/// ROC area by exhaustive positive/negative pair ranking.
pub fn auc_oracle(truth: &[bool], scores: &[f64]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &ti) in truth.iter().enumerate() {
        if !ti {
            continue;
        }
        for (j, &tj) in truth.iter().enumerate() {
            if tj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
