use super::metrics::{binary_counts, f1_from_counts};
use super::EvalError;

pub const GRID_SIZE: usize = 100;
pub const GRID_LOW: f64 = 0.01;
pub const GRID_HIGH: f64 = 0.99;

/// Evenly spaced candidates with exact endpoints.
pub fn threshold_grid() -> [f64; GRID_SIZE] {
    let step = (GRID_HIGH - GRID_LOW) / (GRID_SIZE - 1) as f64;
    let mut g: [f64; GRID_SIZE] = std::array::from_fn(|i| GRID_LOW + i as f64 * step);
    g[GRID_SIZE - 1] = GRID_HIGH;
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub f1: f64,
}

/// F1-maximising grid threshold; the lowest wins ties.
pub fn threshold_search(truth: &[bool], scores: &[f64]) -> Result<ThresholdChoice, EvalError> {
    if truth.len() != scores.len() {
        return Err(EvalError::Length { truth: truth.len(), other: scores.len() });
    }
    if !truth.iter().any(|t| *t) {
        return Err(EvalError::SingleClass);
    }
    let mut best: Option<ThresholdChoice> = None;
    for t in threshold_grid() {
        let (tp, fp, _, fneg) = binary_counts(truth, scores, t);
        let f1 = f1_from_counts(tp, fp, fneg).unwrap_or(0.0);
        if best.as_ref().is_none_or(|b| f1 > b.f1) {
            best = Some(ThresholdChoice { threshold: t, f1 });
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = threshold_grid();
        assert_eq!(g.len(), 100);
        assert_eq!((g[0], g[99]), (0.01, 0.99));
        assert!(g.windows(2).all(|w| (w[1] - w[0] - 0.98 / 99.0).abs() < 1e-12));
    }

    #[test]
    fn two_point_example() {
        let c = threshold_search(&[true, false], &[0.9, 0.1]).unwrap();
        assert_eq!(c.f1, 1.0);
        let g = threshold_grid();
        let first = g.iter().copied().find(|t| *t > 0.1).unwrap();
        assert_eq!(c.threshold, first);
    }

    #[test]
    fn all_positive() {
        let c = threshold_search(&[true; 5], &[0.3, 0.5, 0.02, 0.9, 0.6]).unwrap();
        assert_eq!(c.threshold, 0.01);
        assert_eq!(c.f1, 1.0);
    }

    #[test]
    fn no_positives() {
        assert!(matches!(threshold_search(&[false, false], &[0.3, 0.5]), Err(EvalError::SingleClass)));
    }
}
