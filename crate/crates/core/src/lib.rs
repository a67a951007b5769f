//! Overnight single-lead ECG analysis: sleep phenotypes and Holter-grade
//! cardiac phenotypes from the same recording.
//!
//! The crate is organised as a pipeline of independent stages:
//!
//! - [`ingest`]: EDF decoding, NSRR scored-event annotations, 30-s epoch
//!   labels, boundary trimming and cohort QC.
//! - [`dsp`]: resample → bandpass → baseline removal → robust z-score →
//!   amplitude normalisation, then 30-s epoch segmentation.
//! - [`features`]: 39-dimensional handcrafted descriptor per epoch (Welch
//!   spectral summary plus db4 wavelet statistics).
//! - [`model`]: lightweight windowed epoch classifier, losses, class
//!   collapsing and external probability ingestion.
//! - [`sleepmetrics`] / [`holter`]: the 16 sleep and 32 cardiac metrics.
//! - [`eval`]: recording-level splits, classification metrics, threshold
//!   search and epoch-level bootstrap.
//! - [`assoc`]: stratified cardio-sleep comparisons and PSQI consistency.
//! - [`pipeline`]: configuration, end-to-end orchestration and reports.

pub mod assoc;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod holter;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod sleepmetrics;
pub mod synth;

mod stage;
pub(crate) mod stats;

pub use stage::Stage;

/// Length of one scoring epoch in seconds.
pub const EPOCH_SECONDS: f64 = 30.0;

/// Sampling rate every recording is brought to before feature extraction.
pub const TARGET_FS: f64 = 100.0;

/// Samples per epoch at [`TARGET_FS`].
pub const EPOCH_SAMPLES: usize = 3000;
