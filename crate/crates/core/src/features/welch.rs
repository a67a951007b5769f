use std::sync::Arc;

use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WelchConfig {
    pub segment_len: usize,
    pub overlap: usize,
}

impl Default for WelchConfig {
    fn default() -> Self {
        WelchConfig {
            segment_len: 256,
            overlap: 128,
        }
    }
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub resolution: f64,
}

/// Reusable Welch estimator: periodic Hann window, per-segment mean
/// removal, averaged one-sided density.
pub struct Welch {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    step: usize,
    fs: f64,
    scale: f64,
}

impl Welch {
    pub fn new(cfg: &WelchConfig, fs: f64) -> Result<Self, FeatureError> {
        let n = cfg.segment_len;
        if n < 2 || cfg.overlap >= n {
            return Err(FeatureError::Config(format!(
                "segment_len {n} with overlap {}",
                cfg.overlap
            )));
        }
        let window: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect();
        let wss: f64 = window.iter().map(|w| w * w).sum();
        Ok(Welch {
            fft: FftPlanner::new().plan_fft_forward(n),
            window,
            step: n - cfg.overlap,
            fs,
            scale: 1.0 / (fs * wss),
        })
    }

    pub fn segment_len(&self) -> usize {
        self.window.len()
    }

    /// Number of full segments that fit in `len` samples.
    pub fn n_segments(&self, len: usize) -> usize {
        if len < self.window.len() {
            0
        } else {
            (len - self.window.len()) / self.step + 1
        }
    }

    pub fn psd(&self, x: &[f64]) -> Result<PsdEstimate, FeatureError> {
        let n = self.window.len();
        let n_seg = self.n_segments(x.len());
        if n_seg == 0 {
            return Err(FeatureError::TooShort {
                len: x.len(),
                needed: n,
            });
        }
        let n_bins = n / 2 + 1;
        let mut power = vec![0.0; n_bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for s in 0..n_seg {
            let seg = &x[s * self.step..s * self.step + n];
            let mean = seg.iter().sum::<f64>() / n as f64;
            for ((b, v), w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex64::new((v - mean) * w, 0.0);
            }
            self.fft.process(&mut buf);
            for (p, b) in power.iter_mut().zip(&buf) {
                *p += b.norm_sqr();
            }
        }
        let nyquist = if n % 2 == 0 { Some(n_bins - 1) } else { None };
        for (k, p) in power.iter_mut().enumerate() {
            let one_sided = if k == 0 || Some(k) == nyquist { 1.0 } else { 2.0 };
            *p *= one_sided * self.scale / n_seg as f64;
        }
        let resolution = self.fs / n as f64;
        Ok(PsdEstimate {
            freqs: (0..n_bins).map(|k| k as f64 * resolution).collect(),
            power,
            resolution,
        })
    }
}

pub fn welch_psd(x: &[f64], fs: f64, cfg: &WelchConfig) -> Result<PsdEstimate, FeatureError> {
    Welch::new(cfg, fs)?.psd(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand::Rng;

    // Box-Muller.
    fn normal(rng: &mut impl Rng) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Averaged periodogram from a direct O(N^2) DFT per segment.
    fn direct_welch(x: &[f64], fs: f64) -> Vec<f64> {
        let n = 256;
        let step = 128;
        let w: Vec<f64> = (0..n)
            .map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2))
            .collect();
        let wss: f64 = w.iter().map(|v| v * v).sum();
        let n_seg = (x.len() - n) / step + 1;
        let mut p = vec![0.0; n / 2 + 1];
        for s in 0..n_seg {
            let seg = &x[s * step..s * step + n];
            let m = seg.iter().sum::<f64>() / n as f64;
            for (k, pk) in p.iter_mut().enumerate() {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, v) in seg.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (k * j % n) as f64 / n as f64;
                    re += (v - m) * w[j] * ph.cos();
                    im += (v - m) * w[j] * ph.sin();
                }
                let f = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
                *pk += f * (re * re + im * im) / (fs * wss);
            }
        }
        p.iter().map(|v| v / n_seg as f64).collect()
    }

    #[test]
    fn matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..3000).map(|_| normal(&mut rng)).collect();
        let fast = welch_psd(&x, 100.0, &WelchConfig::default()).unwrap();
        let slow = direct_welch(&x, 100.0);
        for (a, b) in fast.power.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300), "{a} {b}");
        }
    }

    #[test]
    fn grid_and_segments() {
        let w = Welch::new(&WelchConfig::default(), 100.0).unwrap();
        assert_eq!(w.n_segments(3000), 22);
        let p = w.psd(&vec![0.0; 3000]).unwrap();
        assert_eq!(p.freqs.len(), 129);
        assert_eq!(p.resolution, 0.390625);
        assert_eq!(*p.freqs.last().unwrap(), 50.0);
        assert!(p.power.iter().all(|v| *v == 0.0));
        assert!(w.psd(&[0.0; 255]).is_err());
    }

    #[test]
    fn white_noise_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x: Vec<f64> = (0..3000).map(|_| normal(&mut rng)).collect();
        let p = welch_psd(&x, 100.0, &WelchConfig::default()).unwrap();
        let integral: f64 = p.power.iter().sum::<f64>() * p.resolution;
        assert!((integral - 1.0).abs() < 0.05, "{integral}");
    }

    #[test]
    fn tone_peak() {
        let x: Vec<f64> = (0..3000)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / 100.0).sin())
            .collect();
        let p = welch_psd(&x, 100.0, &WelchConfig::default()).unwrap();
        let k = p
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((p.freqs[k] - 10.0).abs() <= p.resolution);
    }
}
