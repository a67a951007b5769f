use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::model::{Granularity, ProbabilityMatrix};
use crate::stats::midranks;
use crate::Stage;

/// K×K counts, rows = truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix { k, counts: vec![0; k * k] }
    }

    pub fn from_labels(truth: &[usize], pred: &[usize], k: usize) -> Result<Self, EvalError> {
        if truth.len() != pred.len() {
            return Err(EvalError::Length { truth: truth.len(), other: pred.len() });
        }
        let mut cm = Self::new(k);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= k || p >= k {
                return Err(EvalError::Label(t.max(p)));
            }
            cm.counts[t * k + p] += 1;
        }
        Ok(cm)
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self, EvalError> {
        if counts.len() != k * k {
            return Err(EvalError::Length { truth: k * k, other: counts.len() });
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.k).map(|i| (0..self.k).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k).map(|j| (0..self.k).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k).map(<[u64]>::to_vec).collect()
    }

    /// Sum blocks of a five-class matrix into the coarser classes.
    pub fn collapse(&self, g: Granularity) -> Result<Self, EvalError> {
        if self.k != 5 {
            return Err(EvalError::Classes(self.k));
        }
        let mut out = Self::new(g.n_classes());
        for t in Stage::ALL {
            for p in Stage::ALL {
                let (a, b) = (g.group(t), g.group(p));
                out.counts[a * out.k + b] += self.get(t.index(), p.index());
            }
        }
        Ok(out)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (0..self.k).map(|i| self.get(i, i)).sum::<u64>() as f64 / n as f64)
    }

    /// Cohen's κ; undefined when chance agreement is 1.
    pub fn kappa(&self) -> Option<f64> {
        let n = self.total() as f64;
        if n == 0.0 {
            return None;
        }
        let po = self.accuracy()?;
        let pe: f64 = self
            .row_sums()
            .iter()
            .zip(self.col_sums())
            .map(|(r, c)| *r as f64 * c as f64)
            .sum::<f64>()
            / (n * n);
        (pe < 1.0).then(|| (po - pe) / (1.0 - pe))
    }

    /// Per-class F1 = 2TP / (2TP + FP + FN); 0 when the class never occurs.
    pub fn f1_per_class(&self) -> Vec<f64> {
        let (rows, cols) = (self.row_sums(), self.col_sums());
        (0..self.k)
            .map(|i| {
                let tp = self.get(i, i) as f64;
                let den = rows[i] as f64 + cols[i] as f64;
                if den == 0.0 {
                    0.0
                } else {
                    2.0 * tp / den
                }
            })
            .collect()
    }

    pub fn weighted_f1(&self) -> Option<f64> {
        let n = self.total() as f64;
        (n > 0.0).then(|| {
            self.f1_per_class().iter().zip(self.row_sums()).map(|(f, s)| f * s as f64).sum::<f64>() / n
        })
    }
}

/// ROC area by the rank statistic with midranks for ties. `None` when
/// either class is absent.
pub fn auc(truth: &[bool], scores: &[f64]) -> Option<f64> {
    let n_pos = truth.iter().filter(|t| **t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 || truth.len() != scores.len() {
        return None;
    }
    let ranks = midranks(scores);
    let r_pos: f64 = ranks.iter().zip(truth).filter(|(_, t)| **t).map(|(r, _)| r).sum();
    let u = r_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagingMetrics {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub kappa: Option<f64>,
    pub macro_auc: Option<f64>,
    /// One-vs-rest AUC per class; `None` where the class is absent.
    pub class_auc: Vec<Option<f64>>,
    pub confusion: ConfusionMatrix,
}

pub fn staging_metrics(
    truth: &[usize],
    pred: &[usize],
    probs: Option<&ProbabilityMatrix>,
    k: usize,
) -> Result<StagingMetrics, EvalError> {
    if truth.is_empty() {
        return Err(EvalError::Empty("truth".into()));
    }
    let cm = ConfusionMatrix::from_labels(truth, pred, k)?;
    let (class_auc, macro_auc) = match probs {
        Some(p) => {
            if p.n_rows() != truth.len() || p.n_classes() != k {
                return Err(EvalError::Length { truth: truth.len(), other: p.n_rows() });
            }
            let per: Vec<Option<f64>> = (0..k)
                .map(|c| {
                    let t: Vec<bool> = truth.iter().map(|&y| y == c).collect();
                    let s: Vec<f64> = p.rows().map(|r| r[c]).collect();
                    let a = auc(&t, &s);
                    if a.is_none() {
                        log::warn!("class {c} absent from truth; AUC excluded");
                    }
                    a
                })
                .collect();
            let defined: Vec<f64> = per.iter().flatten().copied().collect();
            let m = crate::stats::mean(&defined);
            (per, m)
        }
        None => (Vec::new(), None),
    };
    Ok(StagingMetrics {
        accuracy: cm.accuracy().unwrap(),
        weighted_f1: cm.weighted_f1().unwrap(),
        kappa: cm.kappa(),
        macro_auc,
        class_auc,
        confusion: cm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// Counts `(tp, fp, tn, fn)` with prediction `score >= threshold`.
pub fn binary_counts(truth: &[bool], scores: &[f64], threshold: f64) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut tn, mut fneg) = (0, 0, 0, 0);
    for (&t, &s) in truth.iter().zip(scores) {
        match (t, s >= threshold) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fneg += 1,
        }
    }
    (tp, fp, tn, fneg)
}

pub fn f1_from_counts(tp: u64, fp: u64, fneg: u64) -> Option<f64> {
    let den = 2 * tp + fp + fneg;
    (den > 0).then(|| 2.0 * tp as f64 / den as f64)
}

pub fn binary_metrics(truth: &[bool], scores: &[f64], threshold: f64) -> Result<BinaryMetrics, EvalError> {
    if truth.len() != scores.len() {
        return Err(EvalError::Length { truth: truth.len(), other: scores.len() });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty("truth".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(EvalError::Score(*s));
    }
    let (tp, fp, tn, fneg) = binary_counts(truth, scores, threshold);
    let ratio = |a: u64, b: u64| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    Ok(BinaryMetrics {
        accuracy: (tp + tn) as f64 / truth.len() as f64,
        precision: ratio(tp, fp),
        recall: ratio(tp, fneg),
        specificity: ratio(tn, fp),
        f1: f1_from_counts(tp, fp, fneg),
        auc: auc(truth, scores),
        tp,
        fp,
        tn,
        fn_: fneg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_example() {
        let cm = ConfusionMatrix::from_counts(2, vec![40, 10, 20, 30]).unwrap();
        assert!((cm.accuracy().unwrap() - 0.7).abs() < 1e-15);
        assert!((cm.kappa().unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn perfect() {
        let y = [0, 1, 2, 3, 4, 0, 2];
        let mut data = vec![0.0; 35];
        for (i, &c) in y.iter().enumerate() {
            data[i * 5 + c] = 1.0;
        }
        let p = ProbabilityMatrix::new(5, data).unwrap();
        let m = staging_metrics(&y, &y, Some(&p), 5).unwrap();
        assert_eq!((m.accuracy, m.kappa, m.macro_auc, m.weighted_f1), (1.0, Some(1.0), Some(1.0), 1.0));
    }

    #[test]
    fn uninformative_auc() {
        let y = [0, 1, 2, 3, 4, 4, 3, 2];
        let p = ProbabilityMatrix::new(5, vec![0.2; 40]).unwrap();
        let m = staging_metrics(&y, &[0; 8], Some(&p), 5).unwrap();
        assert!(m.class_auc.iter().all(|a| *a == Some(0.5)));
    }

    #[test]
    fn absent_class_excluded() {
        let y = [0, 1, 0, 1];
        let p = ProbabilityMatrix::new(3, vec![0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.7, 0.2, 0.1, 0.3, 0.6, 0.1]).unwrap();
        let m = staging_metrics(&y, &y, Some(&p), 3).unwrap();
        assert_eq!(m.class_auc[2], None);
        assert_eq!(m.macro_auc, Some(1.0));
    }

    #[test]
    fn binary_example() {
        // A tie between a positive and a negative score counts half a pair.
        let m = binary_metrics(&[true, true, false, false], &[0.9, 0.7, 0.7, 0.1], 0.75).unwrap();
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(0.5));
        assert_eq!(m.specificity, Some(1.0));
        assert!((m.f1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.auc, Some(0.875));

        let m = binary_metrics(&[true, true, false, false], &[0.9, 0.8, 0.7, 0.1], 0.75).unwrap();
        assert_eq!((m.precision, m.recall, m.specificity, m.f1), (Some(1.0), Some(1.0), Some(1.0), Some(1.0)));
        assert_eq!(m.auc, Some(1.0));
    }

    #[test]
    fn binary_single_class_auc_absent() {
        let m = binary_metrics(&[true, true], &[0.9, 0.2], 0.5).unwrap();
        assert_eq!(m.auc, None);
        assert_eq!(m.specificity, None);
    }

    #[test]
    fn collapse_matches_label_collapse() {
        let truth = [0, 1, 2, 3, 4, 1, 2, 2, 0, 4];
        let pred = [0, 2, 2, 2, 4, 1, 3, 1, 1, 0];
        let cm = ConfusionMatrix::from_labels(&truth, &pred, 5).unwrap();
        for g in Granularity::ALL {
            let f = |v: &[usize]| -> Vec<usize> { v.iter().map(|&i| g.group(Stage::ALL[i])).collect() };
            let direct = ConfusionMatrix::from_labels(&f(&truth), &f(&pred), g.n_classes()).unwrap();
            assert_eq!(cm.collapse(g).unwrap(), direct);
        }
    }
}
