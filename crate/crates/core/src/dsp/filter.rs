//! Butterworth bandpass in second-order sections, applied forward and
//! backward for zero phase.

use rustfft::num_complex::Complex64;

use super::DspError;

/// One biquad `[b0, b1, b2, a0, a1, a2]` with `a0 == 1`.
pub type Sos = [f64; 6];

/// Digital Butterworth bandpass from a prototype of order `order`
/// (`2 * order` poles). Unity gain at the geometric centre frequency.
pub fn butter_bandpass(order: usize, low: f64, high: f64, fs: f64) -> Result<Vec<Sos>, DspError> {
    if order == 0 || !(low > 0.0) || !(high > low) || !(high < fs / 2.0) {
        return Err(DspError::InvalidBand { low, high, fs });
    }
    let fs2 = 2.0 * fs;
    let wl = fs2 * (std::f64::consts::PI * low / fs).tan();
    let wh = fs2 * (std::f64::consts::PI * high / fs).tan();
    let bw = wh - wl;
    let w0 = (wl * wh).sqrt();

    let mut poles = Vec::with_capacity(2 * order);
    for k in 0..order {
        let theta = std::f64::consts::PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * (bw / 2.0);
        let disc = (half * half - w0 * w0).sqrt();
        for s in [half + disc, half - disc] {
            poles.push((fs2 + s) / (fs2 - s));
        }
    }

    // Conjugate pairs become biquads with one zero at z = 1 and one at z = -1.
    let mut upper: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > 1e-14).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= 1e-14)
        .map(|p| p.re)
        .collect();
    upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(f64::total_cmp);
    let mut sos: Vec<Sos> = upper
        .iter()
        .map(|p| [1.0, 0.0, -1.0, 1.0, -2.0 * p.re, p.norm_sqr()])
        .collect();
    for pair in real.chunks(2) {
        match pair {
            [a, b] => sos.push([1.0, 0.0, -1.0, 1.0, -(a + b), a * b]),
            [a] => sos.push([1.0, -1.0, 0.0, 1.0, -a, 0.0]),
            _ => unreachable!(),
        }
    }

    let omega0 = 2.0 * (w0 / fs2).atan();
    let gain = response(&sos, omega0).norm();
    let per_section = gain.powf(-1.0 / sos.len() as f64);
    for s in &mut sos {
        for b in &mut s[..3] {
            *b *= per_section;
        }
    }
    Ok(sos)
}

/// Complex response at normalised angular frequency `omega` (rad/sample).
pub fn response(sos: &[Sos], omega: f64) -> Complex64 {
    let z1 = Complex64::from_polar(1.0, -omega);
    let z2 = z1 * z1;
    sos.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
        acc * (s[0] + z1 * s[1] + z2 * s[2]) / (s[3] + z1 * s[4] + z2 * s[5])
    })
}

fn sosfilt_zi(sos: &[Sos]) -> Vec<[f64; 2]> {
    let mut scale = 1.0;
    sos.iter()
        .map(|s| {
            let y = (s[0] + s[1] + s[2]) / (s[3] + s[4] + s[5]);
            let z1 = s[2] - s[5] * y;
            let z0 = s[1] - s[4] * y + z1;
            let zi = [scale * z0, scale * z1];
            scale *= y;
            zi
        })
        .collect()
}

/// Transposed direct-form II cascade, in place.
fn sosfilt(sos: &[Sos], x: &mut [f64], mut state: Vec<[f64; 2]>) {
    for v in x.iter_mut() {
        let mut u = *v;
        for (s, z) in sos.iter().zip(state.iter_mut()) {
            let y = s[0] * u + z[0];
            z[0] = s[1] * u - s[4] * y + z[1];
            z[1] = s[2] * u - s[5] * y;
            u = y;
        }
        *v = u;
    }
}

/// Zero-phase forward-backward filtering with odd-extension padding of
/// `padlen` samples at each end.
pub fn sosfiltfilt(sos: &[Sos], x: &[f64], padlen: usize) -> Result<Vec<f64>, DspError> {
    let n = x.len();
    if n <= padlen || n < 2 {
        return Err(DspError::TooShort {
            len: n,
            needed: padlen + 1,
        });
    }
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    ext.extend((1..=padlen).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=padlen).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let zi = sosfilt_zi(sos);
    let scaled = |x0: f64| zi.iter().map(|z| [z[0] * x0, z[1] * x0]).collect::<Vec<_>>();
    let x0 = ext[0];
    sosfilt(sos, &mut ext, scaled(x0));
    ext.reverse();
    let y0 = ext[0];
    sosfilt(sos, &mut ext, scaled(y0));
    ext.reverse();
    Ok(ext[padlen..padlen + n].to_vec())
}

/// Samples needed for the filter transient to decay: one period of the
/// low cutoff.
pub fn settle_len(low: f64, fs: f64) -> usize {
    (fs / low).ceil() as usize
}

/// Zero-phase bandpass of `signal` sampled at `fs`.
pub fn bandpass(
    signal: &[f64],
    low: f64,
    high: f64,
    order: usize,
    fs: f64,
) -> Result<Vec<f64>, DspError> {
    let sos = butter_bandpass(order, low, high, fs)?;
    let settle = settle_len(low, fs);
    if signal.len() < 3 * settle {
        return Err(DspError::TooShort {
            len: signal.len(),
            needed: 3 * settle,
        });
    }
    sosfiltfilt(&sos, signal, (3 * settle).min(signal.len() - 1))
}
