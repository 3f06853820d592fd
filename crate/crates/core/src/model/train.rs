//! One-hidden-layer MLP trained by mini-batch gradient descent on Gaussian blobs.
//!
//! This is the self-contained model the test suite and the CLI use when no
//! externally trained network is at hand.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::bundle::{ActivationKind, FloatModel, Layer};
use super::dataset::LabeledDataset;
use super::engine::softmax;
use super::tensor::FloatTensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub classes: usize,
    pub dims: usize,
    /// Total samples, split into train and held-out sets.
    pub samples: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Standard deviation of the class centers; samples have unit spread around them.
    pub center_spread: f64,
    pub test_fraction: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            dims: 8,
            samples: 2000,
            hidden: 16,
            epochs: 40,
            seed: 7,
            learning_rate: 0.05,
            batch_size: 32,
            center_spread: 2.5,
            test_fraction: 0.25,
        }
    }
}

impl ToyConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.classes < 2 {
            return bad("at least 2 classes are required");
        }
        if self.classes > usize::from(u16::MAX) {
            return bad("class labels must fit in u16");
        }
        if self.dims == 0 || self.hidden == 0 || self.batch_size == 0 {
            return bad("dims, hidden and batch_size must be positive");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must be in (0, 1)");
        }
        let test = (self.samples as f64 * self.test_fraction).round() as usize;
        if test == 0 || test >= self.samples {
            return bad("need at least one training and one held-out sample");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.center_spread.is_nan() || self.center_spread <= 0.0 {
            return bad("learning_rate and center_spread must be positive");
        }
        Ok(())
    }
}

/// Parameters of the network `softmax(W2 relu(W1 x + b1) + b2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub dims: usize,
    pub hidden: usize,
    pub classes: usize,
    /// `[hidden, dims]`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `[classes, hidden]`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Mlp {
    pub fn init<R: Rng>(dims: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        let mut normal = |n: usize, scale: f64| -> Vec<f64> {
            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * scale).collect()
        };
        let w1 = normal(hidden * dims, (2.0 / dims as f64).sqrt());
        let w2 = normal(classes * hidden, (1.0 / hidden as f64).sqrt());
        Self { dims, hidden, classes, w1, b1: vec![0.0; hidden], w2, b2: vec![0.0; classes] }
    }

    /// Parameters flattened as `w1, b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (w1, rest) = p.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2.copy_from_slice(b2);
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        self.b1
            .iter()
            .zip(self.w1.chunks_exact(self.dims))
            .map(|(&b, row)| row.iter().zip(x).fold(b, |a, (w, v)| a + w * v))
            .collect()
    }

    fn logits(&self, h: &[f64]) -> Vec<f64> {
        self.b2
            .iter()
            .zip(self.w2.chunks_exact(self.hidden))
            .map(|(&b, row)| row.iter().zip(h).fold(b, |a, (w, v)| a + w * v))
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = self.hidden_pre(x).into_iter().map(|v| v.max(0.0)).collect();
        softmax(&self.logits(&h))
    }

    /// Mean cross-entropy over the batch and its gradient (same layout as [`Mlp::params`]).
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[usize]) -> (f64, Vec<f64>) {
        let (nw1, nb1, nw2) = (self.w1.len(), self.b1.len(), self.w2.len());
        let mut g = vec![0.0; nw1 + nb1 + nw2 + self.b2.len()];
        let mut loss = 0.0;
        let n = xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let pre = self.hidden_pre(x);
            let h: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
            let p = softmax(&self.logits(&h));
            loss -= if p[y].is_nan() { f64::NAN } else { p[y].max(f64::MIN_POSITIVE).ln() };

            let mut dlogit = p;
            dlogit[y] -= 1.0;
            let mut dh = vec![0.0; self.hidden];
            for (c, &d) in dlogit.iter().enumerate() {
                g[nw1 + nb1 + nw2 + c] += d;
                for j in 0..self.hidden {
                    g[nw1 + nb1 + c * self.hidden + j] += d * h[j];
                    dh[j] += d * self.w2[c * self.hidden + j];
                }
            }
            for j in 0..self.hidden {
                if pre[j] <= 0.0 {
                    continue;
                }
                g[nw1 + j] += dh[j];
                for i in 0..self.dims {
                    g[j * self.dims + i] += dh[j] * x[i];
                }
            }
        }
        g.iter_mut().for_each(|v| *v /= n);
        (loss / n, g)
    }

    pub fn to_float_model(&self, metadata: BTreeMap<String, String>) -> FloatModel {
        let t = |name: &str, shape: Vec<usize>, v: &[f64]| FloatTensor { name: name.into(), shape, values: v.to_vec() };
        FloatModel {
            layers: vec![
                Layer::Dense { weights: "fc1.weight".into(), bias: "fc1.bias".into() },
                Layer::Activation { kind: ActivationKind::Relu },
                Layer::Dense { weights: "fc2.weight".into(), bias: "fc2.bias".into() },
                Layer::Softmax,
            ],
            tensors: vec![
                t("fc1.weight", vec![self.hidden, self.dims], &self.w1),
                t("fc1.bias", vec![self.hidden], &self.b1),
                t("fc2.weight", vec![self.classes, self.hidden], &self.w2),
                t("fc2.bias", vec![self.classes], &self.b2),
            ],
            metadata,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToyOutcome {
    pub model: FloatModel,
    pub mlp: Mlp,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub test_accuracy: f64,
    pub final_loss: f64,
}

/// Gaussian blobs: one center per class, unit-variance samples, features
/// rounded to `f32` so the fixture file holds exactly what was trained on.
pub fn gaussian_blobs<R: Rng>(cfg: &ToyConfig, rng: &mut R) -> (Vec<f32>, Vec<u16>) {
    let centers: Vec<Vec<f64>> = (0..cfg.classes)
        .map(|_| (0..cfg.dims).map(|_| rng.sample::<f64, _>(StandardNormal) * cfg.center_spread).collect())
        .collect();
    let mut labels: Vec<u16> = (0..cfg.samples).map(|i| (i % cfg.classes) as u16).collect();
    labels.shuffle(rng);
    let mut features = Vec::with_capacity(cfg.samples * cfg.dims);
    for &l in &labels {
        for c in &centers[usize::from(l)] {
            features.push((c + rng.sample::<f64, _>(StandardNormal)) as f32);
        }
    }
    (features, labels)
}

pub fn train_toy(cfg: &ToyConfig) -> Result<ToyOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (features, labels) = gaussian_blobs(cfg, &mut rng);
    let n_test = (cfg.samples as f64 * cfg.test_fraction).round() as usize;
    let n_train = cfg.samples - n_test;
    let d = cfg.dims;
    let train = LabeledDataset::new(d, features[..n_train * d].to_vec(), labels[..n_train].to_vec())?;
    let test = LabeledDataset::new(d, features[n_train * d..].to_vec(), labels[n_train..].to_vec())?;

    let xs: Vec<Vec<f64>> = train.iter().map(|(x, _)| x).collect();
    let ys: Vec<usize> = train.labels().iter().map(|&l| usize::from(l)).collect();

    let mut mlp = Mlp::init(d, cfg.hidden, cfg.classes, &mut rng);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut final_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| ys[i]).collect();
            let (loss, grad) = mlp.loss_and_grad(&bx, &by);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, loss });
            }
            epoch_loss += loss * batch.len() as f64;
            let mut p = mlp.params();
            p.iter_mut().zip(&grad).for_each(|(w, g)| *w -= cfg.learning_rate * g);
            mlp.set_params(&p);
        }
        final_loss = epoch_loss / n_train as f64;
    }

    let correct = test
        .iter()
        .filter(|(x, y)| super::engine::in_top_k(&mlp.predict(x), usize::from(*y), 1))
        .count();
    let test_accuracy = correct as f64 / test.len() as f64;

    let metadata = BTreeMap::from([
        ("trainer".to_string(), "toy_mlp".to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("epochs".to_string(), cfg.epochs.to_string()),
        ("float_test_accuracy".to_string(), format!("{test_accuracy}")),
    ]);
    let model = mlp.to_float_model(metadata);
    Ok(ToyOutcome { model, mlp, train, test, test_accuracy, final_loss })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_configs() {
        for cfg in [
            ToyConfig { classes: 1, ..Default::default() },
            ToyConfig { hidden: 0, ..Default::default() },
            ToyConfig { samples: 1, ..Default::default() },
            ToyConfig { test_fraction: 1.0, ..Default::default() },
        ] {
            assert!(matches!(train_toy(&cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = ToyConfig { learning_rate: 1e200, epochs: 5, ..Default::default() };
        assert!(matches!(train_toy(&cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Mlp::init(3, 4, 2, &mut rng);
        let p: Vec<f64> = (0..m.params().len()).map(|i| i as f64).collect();
        m.set_params(&p);
        assert_eq!(m.params(), p);
    }
}
