//! Small fully connected classifier over context-window inputs: a ReLU
//! trunk shared by one or more softmax heads.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_sleep, softmax};
use super::{ModelError, ProbabilityMatrix, Windows};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out x n_in`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn init(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / n_in as f64).sqrt();
        Dense {
            n_in,
            n_out,
            weight: (0..n_in * n_out).map(|_| rng.gen_range(-limit..limit)).collect(),
            bias: vec![0.0; n_out],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Accumulate parameter gradients for output gradient `dz` and input `x`;
    /// return the gradient with respect to `x` when `want_input`.
    fn backward(&self, x: &[f64], dz: &[f64], gw: &mut [f64], gb: &mut [f64], want_input: bool) -> Vec<f64> {
        let mut dx = if want_input { vec![0.0; self.n_in] } else { Vec::new() };
        for (o, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[o] += d;
            let row = &self.weight[o * self.n_in..(o + 1) * self.n_in];
            let grow = &mut gw[o * self.n_in..(o + 1) * self.n_in];
            for (g, v) in grow.iter_mut().zip(x) {
                *g += d * v;
            }
            if want_input {
                for (a, w) in dx.iter_mut().zip(row) {
                    *a += d * w;
                }
            }
        }
        dx
    }
}

/// Architecture: trunk hidden widths and one output width per head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub heads: Vec<usize>,
}

impl Architecture {
    /// `[input, 256, 5]` staging network.
    pub fn staging(input_dim: usize) -> Self {
        Architecture {
            input_dim,
            hidden: vec![256],
            heads: vec![5],
        }
    }

    /// Shared trunk with arousal and respiratory binary heads.
    pub fn events(input_dim: usize) -> Self {
        Architecture {
            input_dim,
            hidden: vec![256],
            heads: vec![2, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub arch: Architecture,
    pub seed: u64,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub trunk: Vec<Dense>,
    pub heads: Vec<Dense>,
}

/// Per-sample activations kept for backpropagation.
pub(crate) struct Trace {
    /// Input to each trunk layer, then the trunk output.
    acts: Vec<Vec<f64>>,
    /// Pre-activation of each trunk layer.
    pre: Vec<Vec<f64>>,
    pub(crate) logits: Vec<Vec<f64>>,
}

impl Classifier {
    pub fn new(arch: Architecture, seed: u64) -> Result<Self, ModelError> {
        if arch.input_dim == 0 || arch.heads.is_empty() || arch.hidden.iter().chain(&arch.heads).any(|w| *w == 0) {
            return Err(ModelError::Shape(format!("invalid architecture {arch:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trunk = Vec::new();
        let mut width = arch.input_dim;
        for &h in &arch.hidden {
            trunk.push(Dense::init(width, h, &mut rng));
            width = h;
        }
        let heads = arch.heads.iter().map(|&k| Dense::init(width, k, &mut rng)).collect();
        Ok(Classifier {
            input_mean: vec![0.0; arch.input_dim],
            input_scale: vec![1.0; arch.input_dim],
            arch,
            seed,
            trunk,
            heads,
        })
    }

    /// Set the input standardisation from training windows.
    pub fn fit_normalization(&mut self, x: &Windows) {
        let n = x.len() as f64;
        let d = self.arch.input_dim;
        let mut mean = vec![0.0; d];
        for i in 0..x.len() {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..x.len() {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        self.input_scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        self.input_mean = mean;
    }

    pub(crate) fn trace(&self, x: &[f64]) -> Trace {
        let mut a: Vec<f64> = x
            .iter()
            .zip(&self.input_mean)
            .zip(&self.input_scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect();
        let mut acts = Vec::with_capacity(self.trunk.len() + 1);
        let mut pre = Vec::with_capacity(self.trunk.len());
        for layer in &self.trunk {
            let z = layer.forward(&a);
            let next = z.iter().map(|v| v.max(0.0)).collect();
            acts.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        let logits = self.heads.iter().map(|h| h.forward(&a)).collect();
        acts.push(a);
        Trace { acts, pre, logits }
    }

    /// Logits per head for one input row.
    pub fn logits(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.trace(x).logits
    }

    /// Sum over heads of the cross-entropy for one sample.
    pub fn sample_loss(&self, x: &[f64], labels: &[usize]) -> f64 {
        self.logits(x)
            .iter()
            .zip(labels)
            .map(|(z, &y)| loss_sleep(&softmax(z), y))
            .sum()
    }

    /// Accumulate gradients for one sample into `grads` (layout of
    /// [`Classifier::tensors`]); returns the sample loss.
    pub(crate) fn accumulate(&self, x: &[f64], labels: &[usize], grads: &mut [Vec<f64>]) -> f64 {
        let t = self.trace(x);
        let top = t.acts.last().unwrap();
        let n_trunk = self.trunk.len();
        let mut da = vec![0.0; top.len()];
        let mut loss = 0.0;
        for (h, (head, z)) in self.heads.iter().zip(&t.logits).enumerate() {
            let p = softmax(z);
            loss += loss_sleep(&p, labels[h]);
            let mut dz = p;
            dz[labels[h]] -= 1.0;
            let (gw, gb) = pair_mut(grads, 2 * (n_trunk + h));
            let dx = head.backward(top, &dz, gw, gb, n_trunk > 0);
            for (a, d) in da.iter_mut().zip(dx) {
                *a += d;
            }
        }
        for l in (0..n_trunk).rev() {
            let dz: Vec<f64> = da
                .iter()
                .zip(&t.pre[l])
                .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
                .collect();
            let (gw, gb) = pair_mut(grads, 2 * l);
            da = self.trunk[l].backward(&t.acts[l], &dz, gw, gb, l > 0);
        }
        loss
    }

    /// Parameter tensors in a fixed order: trunk (weight, bias)..., then
    /// heads (weight, bias)....
    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        self.trunk
            .iter()
            .chain(&self.heads)
            .flat_map(|d| [&d.weight, &d.bias])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.trunk
            .iter_mut()
            .chain(self.heads.iter_mut())
            .flat_map(|d| [&mut d.weight, &mut d.bias])
            .collect()
    }

    pub(crate) fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.tensors().iter().map(|t| vec![0.0; t.len()]).collect()
    }

    /// One probability matrix per head.
    pub fn predict(&self, x: &Windows) -> Result<Vec<ProbabilityMatrix>, ModelError> {
        if x.dim != self.arch.input_dim {
            return Err(ModelError::Shape(format!(
                "window dim {} but network expects {}",
                x.dim, self.arch.input_dim
            )));
        }
        let rows: Vec<Vec<Vec<f64>>> = {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..x.len())
                    .into_par_iter()
                    .map(|i| self.logits(x.row(i)).iter().map(|z| softmax(z)).collect())
                    .collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..x.len())
                    .map(|i| self.logits(x.row(i)).iter().map(|z| softmax(z)).collect())
                    .collect()
            }
        };
        self.arch
            .heads
            .iter()
            .enumerate()
            .map(|(h, &k)| {
                let data = rows.iter().flat_map(|r| r[h].iter().copied()).collect();
                ProbabilityMatrix::new(k, data)
            })
            .collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut tensors = BTreeMap::new();
        tensors.insert(
            "input.mean".to_string(),
            Tensor::new(vec![self.arch.input_dim], self.input_mean.clone()),
        );
        tensors.insert(
            "input.scale".to_string(),
            Tensor::new(vec![self.arch.input_dim], self.input_scale.clone()),
        );
        for (prefix, layers) in [("trunk", &self.trunk), ("head", &self.heads)] {
            for (i, d) in layers.iter().enumerate() {
                tensors.insert(
                    format!("{prefix}.{i}.weight"),
                    Tensor::new(vec![d.n_out, d.n_in], d.weight.clone()),
                );
                tensors.insert(format!("{prefix}.{i}.bias"), Tensor::new(vec![d.n_out], d.bias.clone()));
            }
        }
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            seed: self.seed,
            architecture: self.arch.clone(),
            tensors,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, ModelError> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Checkpoint(format!("unknown format '{}'", ck.format)));
        }
        let mut c = Classifier::new(ck.architecture.clone(), ck.seed)?;
        let take = |key: &str, shape: &[usize]| -> Result<Vec<f64>, ModelError> {
            let t = ck
                .tensors
                .get(key)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor '{key}'")))?;
            if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(ModelError::Checkpoint(format!(
                    "tensor '{key}' has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Checkpoint(format!("tensor '{key}' is not finite")));
            }
            Ok(t.data.clone())
        };
        let d = c.arch.input_dim;
        c.input_mean = take("input.mean", &[d])?;
        c.input_scale = take("input.scale", &[d])?;
        for (prefix, layers) in [("trunk", &mut c.trunk), ("head", &mut c.heads)] {
            for (i, l) in layers.iter_mut().enumerate() {
                l.weight = take(&format!("{prefix}.{i}.weight"), &[l.n_out, l.n_in])?;
                l.bias = take(&format!("{prefix}.{i}.bias"), &[l.n_out])?;
            }
        }
        Ok(c)
    }
}

fn pair_mut(v: &mut [Vec<f64>], i: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = v[i..].split_at_mut(1);
    (&mut a[0], &mut b[0])
}

pub const CHECKPOINT_FORMAT: &str = "ecgsleep-mlp-v1";

/// Shape plus row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        Tensor { shape, data }
    }
}

/// JSON checkpoint: format tag, seed, architecture and a key to tensor map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub seed: u64,
    pub architecture: Architecture,
    pub tensors: BTreeMap<String, Tensor>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()
    }

    #[test]
    fn default_shapes() {
        let c = Classifier::new(Architecture::staging(39 * 15), 1).unwrap();
        let shapes: Vec<usize> = c.tensors().iter().map(|t| t.len()).collect();
        assert_eq!(shapes, vec![585 * 256, 256, 256 * 5, 5]);
    }

    #[test]
    fn network_gradient_matches_finite_differences() {
        let arch = Architecture {
            input_dim: 6,
            hidden: vec![5, 4],
            heads: vec![3, 2],
        };
        let mut c = Classifier::new(arch, 9).unwrap();
        let x = random_input(6, 2);
        let labels = [2, 1];
        let mut grads = c.zero_grads();
        c.accumulate(&x, &labels, &mut grads);
        let h = 1e-6;
        let n_tensors = c.tensors().len();
        for t in 0..n_tensors {
            let len = c.tensors()[t].len();
            for i in 0..len {
                let orig = c.tensors()[t][i];
                c.tensors_mut()[t][i] = orig + h;
                let up = c.sample_loss(&x, &labels);
                c.tensors_mut()[t][i] = orig - h;
                let down = c.sample_loss(&x, &labels);
                c.tensors_mut()[t][i] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - grads[t][i]).abs() < 1e-6, "tensor {t}[{i}]: {fd} vs {}", grads[t][i]);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let c = Classifier::new(Architecture::events(12), 4).unwrap();
        let json = serde_json::to_string(&c.to_checkpoint()).unwrap();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back.seed, 4);
        assert_eq!(back.tensors["trunk.0.weight"].shape, vec![256, 12]);
        assert_eq!(Classifier::from_checkpoint(&back).unwrap(), c);

        let mut bad = back.clone();
        bad.tensors.get_mut("head.1.bias").unwrap().shape = vec![3];
        assert!(Classifier::from_checkpoint(&bad).is_err());
    }

    #[test]
    fn predict_rows_are_simplices() {
        let c = Classifier::new(Architecture::staging(10), 3).unwrap();
        let rows: Vec<Vec<f64>> = (0..20).map(|s| random_input(10, s)).collect();
        let w = Windows::from_rows(&rows).unwrap();
        let p = c.predict(&w).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].n_rows(), 20);
        for r in 0..20 {
            assert!((p[0].row(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let wrong = Windows::from_rows(&[vec![0.0; 9]]).unwrap();
        assert!(c.predict(&wrong).is_err());
    }

    #[test]
    fn predict_composes_softmax() {
        // Single affine head with identity weights reproduces the logits.
        let arch = Architecture {
            input_dim: 5,
            hidden: vec![],
            heads: vec![5],
        };
        let mut c = Classifier::new(arch, 0).unwrap();
        let head = &mut c.heads[0];
        head.weight = (0..25).map(|i| if i % 6 == 0 { 1.0 } else { 0.0 }).collect();
        head.bias = vec![0.0; 5];
        let z = vec![1f64.ln(), 2f64.ln(), 3f64.ln(), 4f64.ln(), 10f64.ln()];
        let p = c.predict(&Windows::from_rows(&[z]).unwrap()).unwrap();
        for (a, b) in p[0].row(0).iter().zip([0.05, 0.10, 0.15, 0.20, 0.50]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
