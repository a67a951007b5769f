//! Rational-rate polyphase resampling with a Kaiser-windowed sinc
//! anti-alias/anti-image filter (same design as `scipy.signal.resample_poly`).

use super::DspError;

const KAISER_BETA: f64 = 5.0;
const HALF_LEN_FACTOR: usize = 10;
const MAX_DENOMINATOR: u64 = 1000;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Reduced `(up, down)` with `up / down ≈ fs_out / fs_in`.
pub fn rational_ratio(fs_in: f64, fs_out: f64) -> (u64, u64) {
    let ratio = fs_out / fs_in;
    if fs_in.fract() == 0.0 && fs_out.fract() == 0.0 && fs_in < 1e9 && fs_out < 1e9 {
        let (a, b) = (fs_out as u64, fs_in as u64);
        let g = gcd(a, b);
        return (a / g, b / g);
    }
    // Best rational approximation by continued fractions.
    let (mut h0, mut h1, mut k0, mut k1) = (0u64, 1u64, 1u64, 0u64);
    let mut x = ratio;
    loop {
        let a = x.floor() as u64;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > MAX_DENOMINATOR {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = x - a as f64;
        if frac.abs() < 1e-12 {
            break;
        }
        x = 1.0 / frac;
    }
    let g = gcd(h1, k1).max(1);
    (h1 / g, k1 / g)
}

/// Output length for a resampled signal: `round(len * fs_out / fs_in)`.
pub fn resampled_len(len: usize, fs_in: f64, fs_out: f64) -> usize {
    (len as f64 * fs_out / fs_in).round() as usize
}

fn design_filter(up: u64, down: u64) -> (Vec<f64>, usize) {
    let max_rate = up.max(down) as usize;
    let cutoff = 1.0 / max_rate as f64;
    let half_len = HALF_LEN_FACTOR * max_rate;
    let n = 2 * half_len + 1;
    let i0_beta = bessel_i0(KAISER_BETA);
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let m = i as f64 - half_len as f64;
            let x = cutoff * m;
            let sinc = if x == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
            };
            let r = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            cutoff * sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v *= up as f64 / sum;
    }
    (h, half_len)
}

/// Resample `signal` from `fs_in` to `fs_out`.
///
/// Samples outside the record are treated as zero, so the first and last
/// ~10 output samples carry edge effects.
pub fn resample(signal: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>, DspError> {
    if !(fs_in > 0.0) || !fs_in.is_finite() {
        return Err(DspError::InvalidRate(fs_in));
    }
    if !(fs_out > 0.0) || !fs_out.is_finite() {
        return Err(DspError::InvalidRate(fs_out));
    }
    let n_out = resampled_len(signal.len(), fs_in, fs_out);
    let (up, down) = rational_ratio(fs_in, fs_out);
    if up == down {
        let mut out = signal.to_vec();
        out.resize(n_out, 0.0);
        return Ok(out);
    }
    let (h, half_len) = design_filter(up, down);
    let (up, down) = (up as usize, down as usize);
    let taps = h.len();
    let n_in = signal.len();
    let mut out = Vec::with_capacity(n_out);
    for m in 0..n_out {
        // y[m] = sum_k x[k] * h[m*down + half_len - k*up]
        let pos = m * down + half_len;
        let k_hi = (pos / up).min(n_in.saturating_sub(1));
        let k_lo = if pos + 1 > taps {
            (pos + 1 - taps).div_ceil(up)
        } else {
            0
        };
        let mut acc = 0.0;
        if n_in > 0 && k_lo <= k_hi {
            for k in k_lo..=k_hi {
                acc += signal[k] * h[pos - k * up];
            }
        }
        out.push(acc);
    }
    Ok(out)
}
