/// Lower clamp applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `-sum y_i log(clamp(p_i))` for a target distribution `y`.
pub fn cross_entropy(probs: &[f64], target: &[f64]) -> f64 {
    probs
        .iter()
        .zip(target)
        .filter(|(_, y)| **y != 0.0)
        .map(|(p, y)| -y * p.clamp(PROB_CLAMP, 1.0).ln())
        .sum()
}

/// Cross-entropy against a one-hot label.
pub fn loss_sleep(probs: &[f64], label: usize) -> f64 {
    -probs[label].clamp(PROB_CLAMP, 1.0).ln()
}

/// Joint event loss: unweighted sum of the two head losses.
pub fn loss_multitask(arousal: f64, respiratory: f64) -> f64 {
    arousal + respiratory
}

/// Gradient of `loss_sleep(softmax(z), label)` with respect to `z`.
pub fn softmax_ce_grad(logits: &[f64], label: usize) -> Vec<f64> {
    let mut g = softmax(logits);
    g[label] -= 1.0;
    g
}
