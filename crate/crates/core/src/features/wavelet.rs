//! Daubechies-4 multilevel DWT with half-sample symmetric extension
//! (coefficient layout identical to PyWavelets' `symmetric` mode).

pub const DB4_DEC_LO: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];
pub const DB4_DEC_HI: [f64; 8] = [
    -0.2303778133088965,
    0.7148465705529157,
    -0.6308807679298589,
    -0.027983769416859854,
    0.18703481171909309,
    0.030841381835560764,
    -0.0328830116668852,
    -0.010597401785069032,
];

pub const LEVELS: usize = 4;
pub const SET_NAMES: [&str; 5] = ["A4", "D4", "D3", "D2", "D1"];
pub const STAT_NAMES: [&str; 6] = ["energy", "mean", "std", "variance", "max", "min"];

const F: usize = 8;

fn rev(f: &[f64; 8]) -> [f64; 8] {
    let mut r = *f;
    r.reverse();
    r
}

/// Index into a half-sample symmetric extension of a length-`n` signal.
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Single-level analysis: `(approximation, detail)`, each of length
/// `floor((n + 7) / 2)`.
pub fn dwt(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let out_len = (n + F - 1) / 2;
    let mut ca = Vec::with_capacity(out_len);
    let mut cd = Vec::with_capacity(out_len);
    for o in 0..out_len {
        let i = (2 * o + 1) as isize;
        let (mut a, mut d) = (0.0, 0.0);
        for j in 0..F {
            let v = x[reflect(i - j as isize, n)];
            a += DB4_DEC_LO[j] * v;
            d += DB4_DEC_HI[j] * v;
        }
        ca.push(a);
        cd.push(d);
    }
    (ca, cd)
}

/// Single-level synthesis; output length `2 * len - 6`.
pub fn idwt(ca: &[f64], cd: &[f64]) -> Vec<f64> {
    assert_eq!(ca.len(), cd.len(), "coefficient lengths differ");
    let rec_lo = rev(&DB4_DEC_LO);
    let rec_hi = rev(&DB4_DEC_HI);
    let l = ca.len();
    let out_len = 2 * l + 2 - F;
    (0..out_len)
        .map(|k| {
            let t = k + F - 2;
            let mut acc = 0.0;
            // rec index t - 2o must lie in [0, F).
            let o_lo = (t + 1).saturating_sub(F).div_ceil(2);
            let o_hi = (t / 2).min(l - 1);
            for o in o_lo..=o_hi {
                let idx = t - 2 * o;
                acc += ca[o] * rec_lo[idx] + cd[o] * rec_hi[idx];
            }
            acc
        })
        .collect()
}

/// Multilevel decomposition ordered `[A4, D4, D3, D2, D1]`.
pub fn wavedec(x: &[f64], levels: usize) -> Vec<Vec<f64>> {
    let mut details = Vec::with_capacity(levels);
    let mut a = x.to_vec();
    for _ in 0..levels {
        let (ca, cd) = dwt(&a);
        details.push(cd);
        a = ca;
    }
    let mut out = vec![a];
    out.extend(details.into_iter().rev());
    out
}

/// Inverse of [`wavedec`].
pub fn waverec(coeffs: &[Vec<f64>]) -> Vec<f64> {
    let mut a = coeffs[0].clone();
    for d in &coeffs[1..] {
        if a.len() > d.len() {
            a.truncate(d.len());
        }
        a = idwt(&a, d);
    }
    a
}

fn set_stats(c: &[f64]) -> [f64; 6] {
    let n = c.len() as f64;
    let energy: f64 = c.iter().map(|v| v * v).sum();
    let mean = c.iter().sum::<f64>() / n;
    let variance = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let max = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = c.iter().copied().fold(f64::INFINITY, f64::min);
    [energy, mean, variance.sqrt(), variance, max, min]
}

/// 30 wavelet descriptors: for each set in [`SET_NAMES`] order, the
/// statistics in [`STAT_NAMES`] order.
pub fn dwt_features(epoch: &[f64]) -> [f64; 30] {
    let mut out = [0.0; 30];
    for (s, c) in wavedec(epoch, LEVELS).iter().enumerate() {
        out[s * 6..s * 6 + 6].copy_from_slice(&set_stats(c));
    }
    out
}
