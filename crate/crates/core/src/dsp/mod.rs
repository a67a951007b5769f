//! ECG preprocessing: resample to 100 Hz, 0.5-40 Hz zero-phase bandpass,
//! global baseline removal, robust z-score, amplitude scaling, then 30-s
//! epoch segmentation.

mod filter;
mod normalize;
mod resample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{bandpass, butter_bandpass, response, settle_len, sosfiltfilt, Sos};
pub use normalize::{amplitude_normalize, remove_baseline, robust_zscore};
pub use resample::{rational_ratio, resample, resampled_len};

use crate::{EPOCH_SAMPLES, TARGET_FS};

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("invalid sampling rate {0} Hz")]
    InvalidRate(f64),
    #[error("invalid band [{low}, {high}] Hz at fs {fs} Hz")]
    InvalidBand { low: f64, high: f64, fs: f64 },
    #[error("signal of {len} samples is too short; need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("invalid preprocessing config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub target_fs: f64,
    pub band: [f64; 2],
    pub filter_order: usize,
    pub baseline_order: usize,
    pub mad_scale: f64,
    pub mad_floor: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_fs: TARGET_FS,
            band: [0.5, 40.0],
            filter_order: 4,
            baseline_order: 1,
            mad_scale: 1.4826,
            mad_floor: 1e-9,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        let [low, high] = self.band;
        if !(0.0 < low && low < high && high < self.target_fs / 2.0) {
            return Err(DspError::InvalidBand {
                low,
                high,
                fs: self.target_fs,
            });
        }
        if self.filter_order == 0 {
            return Err(DspError::Config("filter_order must be positive".into()));
        }
        if !(self.mad_scale > 0.0) || !(self.mad_floor > 0.0) {
            return Err(DspError::Config("mad_scale and mad_floor must be positive".into()));
        }
        Ok(())
    }
}

/// Run the full chain on one recording. The result is at `cfg.target_fs`
/// and lies in [-1, 1].
pub fn preprocess(signal: &[f64], fs_in: f64, cfg: &PreprocessConfig) -> Result<Vec<f64>, DspError> {
    cfg.validate()?;
    let x = resample(signal, fs_in, cfg.target_fs)?;
    let x = bandpass(&x, cfg.band[0], cfg.band[1], cfg.filter_order, cfg.target_fs)?;
    let x = remove_baseline(&x, cfg.baseline_order);
    let x = robust_zscore(&x, cfg.mad_scale, cfg.mad_floor)?;
    Ok(amplitude_normalize(&x))
}

/// Row-major `n_epochs x 3000` matrix of 30-s epochs at 100 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMatrix {
    data: Vec<f64>,
    n_epochs: usize,
}

impl EpochMatrix {
    pub fn n_epochs(&self) -> usize {
        self.n_epochs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * EPOCH_SAMPLES..(i + 1) * EPOCH_SAMPLES]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(EPOCH_SAMPLES)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Keep rows `range`, e.g. after boundary trimming.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> EpochMatrix {
        EpochMatrix {
            data: self.data[range.start * EPOCH_SAMPLES..range.end * EPOCH_SAMPLES].to_vec(),
            n_epochs: range.len(),
        }
    }
}

/// Split into consecutive non-overlapping 3000-sample epochs, dropping a
/// trailing partial epoch.
pub fn segment_epochs(signal: &[f64]) -> Result<EpochMatrix, DspError> {
    let n_epochs = signal.len() / EPOCH_SAMPLES;
    if n_epochs == 0 {
        return Err(DspError::TooShort {
            len: signal.len(),
            needed: EPOCH_SAMPLES,
        });
    }
    Ok(EpochMatrix {
        data: signal[..n_epochs * EPOCH_SAMPLES].to_vec(),
        n_epochs,
    })
}
