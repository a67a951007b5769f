use super::PsdEstimate;

pub const DELTA: (f64, f64) = (0.5, 4.0);
pub const THETA: (f64, f64) = (4.0, 8.0);
pub const ALPHA: (f64, f64) = (8.0, 13.0);
/// Closed band over which total power and the shape descriptors are taken.
pub const ANALYSIS_BAND: (f64, f64) = (0.5, 50.0);

pub const SPECTRAL_NAMES: [&str; 9] = [
    "delta_power",
    "theta_power",
    "alpha_power",
    "total_power",
    "peak_freq",
    "spectral_centroid",
    "spectral_bandwidth",
    "spectral_flatness",
    "spectral_entropy",
];

/// Band power over the half-open band `[lo, hi)`.
fn band_power(psd: &PsdEstimate, (lo, hi): (f64, f64)) -> f64 {
    psd.freqs
        .iter()
        .zip(&psd.power)
        .filter(|(f, _)| **f >= lo && **f < hi)
        .map(|(_, p)| p)
        .sum::<f64>()
        * psd.resolution
}

/// The nine spectral descriptors, in [`SPECTRAL_NAMES`] order.
pub fn spectral_features(psd: &PsdEstimate) -> [f64; 9] {
    let (lo, hi) = ANALYSIS_BAND;
    let bins: Vec<(f64, f64)> = psd
        .freqs
        .iter()
        .zip(&psd.power)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(f, p)| (*f, *p))
        .collect();
    let sum: f64 = bins.iter().map(|b| b.1).sum();
    if bins.is_empty() || !(sum > 0.0) {
        return [0.0; 9];
    }
    let total = sum * psd.resolution;
    let mut peak = bins[0];
    for b in &bins[1..] {
        if b.1 > peak.1 {
            peak = *b;
        }
    }
    let centroid = bins.iter().map(|(f, p)| f * p).sum::<f64>() / sum;
    let bandwidth = (bins
        .iter()
        .map(|(f, p)| (f - centroid).powi(2) * p)
        .sum::<f64>()
        / sum)
        .sqrt();
    let positive: Vec<f64> = bins.iter().map(|b| b.1).filter(|p| *p > 0.0).collect();
    let log_mean = positive.iter().map(|p| p.ln()).sum::<f64>() / positive.len() as f64;
    let arith = positive.iter().sum::<f64>() / positive.len() as f64;
    let flatness = (log_mean.exp() / arith).min(1.0);
    let entropy = -positive
        .iter()
        .map(|p| {
            let q = p / sum;
            q * q.ln()
        })
        .sum::<f64>();
    [
        band_power(psd, DELTA),
        band_power(psd, THETA),
        band_power(psd, ALPHA),
        total,
        peak.0,
        centroid,
        bandwidth,
        flatness,
        entropy.max(0.0),
    ]
}

/// Number of PSD bins inside the analysis band; the entropy upper bound is
/// its logarithm.
pub fn analysis_bins(psd: &PsdEstimate) -> usize {
    let (lo, hi) = ANALYSIS_BAND;
    psd.freqs.iter().filter(|f| **f >= lo && **f <= hi).count()
}
