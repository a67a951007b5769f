//! Per-epoch handcrafted descriptors: nine Welch spectral summaries
//! followed by six statistics for each of the five db4 coefficient sets.

mod cache;
mod spectral;
mod wavelet;
mod welch;

use thiserror::Error;

pub use cache::{read_feature_cache, write_feature_cache, CACHE_MAGIC};
pub use spectral::{analysis_bins, spectral_features, ALPHA, ANALYSIS_BAND, DELTA, SPECTRAL_NAMES, THETA};
pub use wavelet::{dwt, dwt_features, idwt, wavedec, waverec, DB4_DEC_HI, DB4_DEC_LO, SET_NAMES, STAT_NAMES};
pub use welch::{welch_psd, PsdEstimate, Welch, WelchConfig};

use crate::dsp::EpochMatrix;
use crate::TARGET_FS;

pub const N_FEATURES: usize = 39;

pub type FeatureVector = [f64; N_FEATURES];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("input of {len} samples is shorter than one {needed}-sample segment")]
    TooShort { len: usize, needed: usize },
    #[error("invalid feature config: {0}")]
    Config(String),
    #[error("feature parts have lengths {spectral} and {wavelet}; expected 9 and 30")]
    WrongLength { spectral: usize, wavelet: usize },
    #[error("feature cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Names of the 39 features in vector order.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = SPECTRAL_NAMES.iter().map(|s| s.to_string()).collect();
    for set in SET_NAMES {
        for stat in STAT_NAMES {
            names.push(format!("{set}_{stat}"));
        }
    }
    names
}

pub fn assemble_features(spectral: &[f64], wavelet: &[f64]) -> Result<FeatureVector, FeatureError> {
    if spectral.len() != 9 || wavelet.len() != 30 {
        return Err(FeatureError::WrongLength {
            spectral: spectral.len(),
            wavelet: wavelet.len(),
        });
    }
    let mut v = [0.0; N_FEATURES];
    v[..9].copy_from_slice(spectral);
    v[9..].copy_from_slice(wavelet);
    Ok(v)
}

/// Feature extractor with a shared FFT plan.
pub struct Extractor {
    welch: Welch,
}

impl Extractor {
    pub fn new(cfg: &WelchConfig) -> Result<Self, FeatureError> {
        Ok(Extractor {
            welch: Welch::new(cfg, TARGET_FS)?,
        })
    }

    pub fn epoch(&self, epoch: &[f64]) -> Result<FeatureVector, FeatureError> {
        let psd = self.welch.psd(epoch)?;
        assemble_features(&spectral_features(&psd), &dwt_features(epoch))
    }

    /// Features for every row. Rows are independent, so the parallel and
    /// serial paths give identical output.
    pub fn matrix(&self, epochs: &EpochMatrix) -> Result<Vec<FeatureVector>, FeatureError> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let rows: Vec<&[f64]> = epochs.rows().collect();
            rows.par_iter().map(|r| self.epoch(r)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            epochs.rows().map(|r| self.epoch(r)).collect()
        }
    }
}

pub fn extract_epoch(epoch: &[f64]) -> Result<FeatureVector, FeatureError> {
    Extractor::new(&WelchConfig::default())?.epoch(epoch)
}
