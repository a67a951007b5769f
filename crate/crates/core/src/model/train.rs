use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, ModelError, Windows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_passes: usize,
    /// 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    pub patience: usize,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            max_passes: 100,
            batch_size: 64,
            seed: 0,
            patience: 10,
            optimizer: Optimizer::Adam,
        }
    }
}

/// Inputs with one label vector per head, aligned by row.
#[derive(Debug, Clone)]
pub struct Dataset<'a> {
    pub x: &'a Windows,
    pub labels: Vec<&'a [usize]>,
}

impl Dataset<'_> {
    fn check(&self, clf: &Classifier) -> Result<(), ModelError> {
        if self.x.dim != clf.arch.input_dim {
            return Err(ModelError::Shape(format!(
                "input dim {} but network expects {}",
                self.x.dim, clf.arch.input_dim
            )));
        }
        if self.labels.len() != clf.arch.heads.len() {
            return Err(ModelError::Shape(format!(
                "{} label sets for {} heads",
                self.labels.len(),
                clf.arch.heads.len()
            )));
        }
        for (h, l) in self.labels.iter().enumerate() {
            if l.len() != self.x.len() {
                return Err(ModelError::Shape(format!(
                    "head {h}: {} labels for {} windows",
                    l.len(),
                    self.x.len()
                )));
            }
            if let Some(bad) = l.iter().find(|&&y| y >= clf.arch.heads[h]) {
                return Err(ModelError::Shape(format!("head {h}: label {bad} out of range")));
            }
        }
        Ok(())
    }

    fn sample_labels(&self, i: usize) -> Vec<usize> {
        self.labels.iter().map(|l| l[i]).collect()
    }

    /// Mean summed-head loss.
    pub fn mean_loss(&self, clf: &Classifier) -> f64 {
        let n = self.x.len();
        (0..n)
            .map(|i| clf.sample_loss(self.x.row(i), &self.sample_labels(i)))
            .sum::<f64>()
            / n as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub passes_run: usize,
    pub best_pass: usize,
    pub best_val_loss: f64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

/// Minimise the summed cross-entropy with mini-batch gradient descent.
///
/// Batches are visited in an order drawn from `cfg.seed`; gradients are
/// reduced serially, so results are bit-reproducible. The returned
/// classifier holds the parameters with the lowest validation loss (the
/// training loss when no validation set is given).
pub fn train(
    mut clf: Classifier,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Classifier, TrainReport), ModelError> {
    train.check(&clf)?;
    if let Some(v) = val {
        v.check(&clf)?;
    }
    let n = train.x.len();
    if n == 0 {
        return Err(ModelError::Shape("empty training set".into()));
    }
    let batch = if cfg.batch_size == 0 { n } else { cfg.batch_size.min(n) };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = Adam {
        m: clf.zero_grads(),
        v: clf.zero_grads(),
        t: 0,
    };
    let eval_loss = |c: &Classifier| val.map_or_else(|| train.mean_loss(c), |v| v.mean_loss(c));

    let mut best = clf.clone();
    let mut best_loss = eval_loss(&clf);
    let mut report = TrainReport {
        passes_run: 0,
        best_pass: 0,
        best_val_loss: best_loss,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
    };
    let mut stale = 0;
    for pass in 1..=cfg.max_passes {
        order.shuffle(&mut rng);
        let mut pass_loss = 0.0;
        for (b, chunk) in order.chunks(batch).enumerate() {
            let mut grads = clf.zero_grads();
            let mut loss = 0.0;
            for &i in chunk {
                loss += clf.accumulate(train.x.row(i), &train.sample_labels(i), &mut grads);
            }
            if !loss.is_finite() {
                return Err(ModelError::NonFinite {
                    pass,
                    batch: b,
                    loss,
                });
            }
            pass_loss += loss;
            let scale = 1.0 / chunk.len() as f64;
            step(&mut clf, &grads, scale, cfg, &mut adam);
        }
        let vl = eval_loss(&clf);
        if !vl.is_finite() {
            return Err(ModelError::NonFinite {
                pass,
                batch: usize::MAX,
                loss: vl,
            });
        }
        report.train_loss.push(pass_loss / n as f64);
        report.val_loss.push(vl);
        report.passes_run = pass;
        if vl < best_loss {
            best_loss = vl;
            best = clf.clone();
            report.best_pass = pass;
            report.best_val_loss = vl;
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                log::info!("early stop after pass {pass}; best pass {}", report.best_pass);
                break;
            }
        }
    }
    Ok((best, report))
}

fn step(clf: &mut Classifier, grads: &[Vec<f64>], scale: f64, cfg: &TrainConfig, adam: &mut Adam) {
    let lr = cfg.learning_rate;
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (p, g) in clf.tensors_mut().into_iter().zip(grads) {
                for (w, d) in p.iter_mut().zip(g) {
                    *w -= lr * d * scale;
                }
            }
        }
        Optimizer::Adam => {
            let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
            adam.t += 1;
            let c1 = 1.0 - b1.powi(adam.t);
            let c2 = 1.0 - b2.powi(adam.t);
            for (((p, g), m), v) in clf
                .tensors_mut()
                .into_iter()
                .zip(grads)
                .zip(adam.m.iter_mut())
                .zip(adam.v.iter_mut())
            {
                for i in 0..p.len() {
                    let d = g[i] * scale;
                    m[i] = b1 * m[i] + (1.0 - b1) * d;
                    v[i] = b2 * v[i] + (1.0 - b2) * d * d;
                    p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Fraction of rows whose argmax matches the label.
pub fn accuracy(clf: &Classifier, x: &Windows, labels: &[usize], head: usize) -> f64 {
    let hits = (0..x.len())
        .filter(|&i| {
            let z = &clf.logits(x.row(i))[head];
            super::argmax(z) == labels[i]
        })
        .count();
    hits as f64 / x.len() as f64
}
