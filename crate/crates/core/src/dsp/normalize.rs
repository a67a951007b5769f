use super::DspError;

/// Subtract the least-squares polynomial of degree `order` fitted over the
/// whole signal.
pub fn remove_baseline(signal: &[f64], order: usize) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    if n <= order + 1 {
        return vec![0.0; n];
    }
    // Gram-Schmidt on monomials of t in [-1, 1]; the projection onto the
    // orthonormal basis is the least-squares fit.
    let t: Vec<f64> = (0..n)
        .map(|i| 2.0 * i as f64 / (n - 1) as f64 - 1.0)
        .collect();
    let mut residual = signal.to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for d in 0..=order {
        let mut v: Vec<f64> = t.iter().map(|x| x.powi(d as i32)).collect();
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for vi in &mut v {
            *vi /= norm;
        }
        basis.push(v);
    }
    for _ in 0..2 {
        for b in &basis {
            let c: f64 = residual.iter().zip(b).map(|(a, b)| a * b).sum();
            for (r, bi) in residual.iter_mut().zip(b) {
                *r -= c * bi;
            }
        }
    }
    residual
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let hi = *hi;
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo + hi) / 2.0
    }
}

/// `(x - median) / (mad_scale * MAD)`, or zeros when `MAD < mad_floor`.
pub fn robust_zscore(signal: &[f64], mad_scale: f64, mad_floor: f64) -> Result<Vec<f64>, DspError> {
    if signal.is_empty() {
        return Err(DspError::TooShort { len: 0, needed: 1 });
    }
    let mut buf = signal.to_vec();
    let med = median_in_place(&mut buf);
    for (b, x) in buf.iter_mut().zip(signal) {
        *b = (x - med).abs();
    }
    let mad = median_in_place(&mut buf);
    if !(mad >= mad_floor) {
        return Ok(vec![0.0; signal.len()]);
    }
    let scale = mad_scale * mad;
    Ok(signal.iter().map(|x| (x - med) / scale).collect())
}

/// Scale by the maximum absolute value so the output lies in [-1, 1].
pub fn amplitude_normalize(signal: &[f64]) -> Vec<f64> {
    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return vec![0.0; signal.len()];
    }
    signal.iter().map(|v| v / peak).collect()
}
