//! Real-valued forward pass.

use std::cmp::Ordering;

use super::bundle::{infer_shapes, ActivationKind, FloatModel, Layer, ModelBundle};
use super::dataset::LabeledDataset;
use super::tensor::DecodeOptions;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Op {
    Dense {
        weights: Vec<f64>,
        bias: Vec<f64>,
        inputs: usize,
    },
    Conv2d {
        /// `[cout][kh * kw * cin]`, patch order (ky, kx, ci).
        kernels: Vec<f64>,
        bias: Vec<f64>,
        kh: usize,
        kw: usize,
    },
    MaxPool2d(usize),
    Activation(ActivationKind),
    Flatten,
    Softmax,
}

/// A decoded network ready for repeated inference.
#[derive(Clone, Debug)]
pub struct Network {
    input_shape: Vec<usize>,
    ops: Vec<Op>,
    nulled: usize,
}

impl Network {
    pub fn from_bundle(bundle: &ModelBundle, opts: DecodeOptions) -> Result<Self> {
        let decoded = bundle.dequantize(opts)?;
        let nulled = decoded.iter().map(|(_, _, d)| d.nulled).sum();
        let model = FloatModel {
            layers: bundle.layers().to_vec(),
            tensors: decoded
                .into_iter()
                .map(|(name, shape, d)| super::FloatTensor { name, shape, values: d.values })
                .collect(),
            metadata: bundle.metadata().clone(),
        };
        let mut net = Self::build(&model)?;
        net.nulled = nulled;
        Ok(net)
    }

    /// Builds from real weights. Non-finite values are accepted here since
    /// corrupted binary16 words decode to them.
    pub fn from_float(model: &FloatModel) -> Result<Self> {
        Self::build(model)
    }

    fn build(model: &FloatModel) -> Result<Self> {
        let input_shape = model.input_shape()?;
        let lookup = |n: &str| model.tensor(n).map(|t| t.shape.as_slice());
        let shapes = infer_shapes(&model.layers, &input_shape, lookup)?;
        let values = |n: &str| model.tensor(n).map(|t| t.values.clone()).ok_or_else(|| Error::UnknownTensor(n.into()));

        let mut ops = Vec::with_capacity(model.layers.len());
        for (i, layer) in model.layers.iter().enumerate() {
            let in_shape = if i == 0 { &input_shape } else { &shapes[i - 1] };
            ops.push(match layer {
                Layer::Dense { weights, bias } => Op::Dense {
                    weights: values(weights)?,
                    bias: values(bias)?,
                    inputs: in_shape[0],
                },
                Layer::Conv2d { kernels, bias } => {
                    let k = model.tensor(kernels).ok_or_else(|| Error::UnknownTensor(kernels.clone()))?;
                    let (kh, kw, cin, cout) = (k.shape[0], k.shape[1], k.shape[2], k.shape[3]);
                    let patch = kh * kw * cin;
                    let mut transposed = vec![0.0; cout * patch];
                    for j in 0..patch {
                        for co in 0..cout {
                            transposed[co * patch + j] = k.values[j * cout + co];
                        }
                    }
                    Op::Conv2d { kernels: transposed, bias: values(bias)?, kh, kw }
                }
                Layer::MaxPool2d { window } => Op::MaxPool2d(*window),
                Layer::Activation { kind } => Op::Activation(*kind),
                Layer::Flatten => Op::Flatten,
                Layer::Softmax => Op::Softmax,
            });
        }
        Ok(Self { input_shape, ops, nulled: 0 })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Weights zeroed by failed parity checks when this network was decoded.
    pub fn nulled_weights(&self) -> usize {
        self.nulled
    }

    /// Runs every layer; the result is a probability vector when the model ends in softmax.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_len() {
            return Err(Error::Shape {
                layer: 0,
                message: format!("input has {} values, expected shape {:?}", input.len(), self.input_shape),
            });
        }
        let mut shape = self.input_shape.clone();
        let mut x = input.to_vec();
        for op in &self.ops {
            x = match op {
                Op::Dense { weights, bias, inputs } => dense(&x, weights, bias, *inputs),
                Op::Conv2d { kernels, bias, kh, kw } => {
                    let (y, s) = conv2d_valid(&x, &shape, kernels, bias, *kh, *kw);
                    shape = s;
                    y
                }
                Op::MaxPool2d(window) => {
                    let (y, s) = max_pool2d(&x, &shape, *window);
                    shape = s;
                    y
                }
                Op::Activation(ActivationKind::Relu) => x.into_iter().map(|v| v.max(0.0)).collect(),
                Op::Activation(ActivationKind::Sigmoid) => x.into_iter().map(sigmoid).collect(),
                Op::Flatten => x,
                Op::Softmax => softmax(&x),
            };
            if matches!(op, Op::Dense { .. } | Op::Flatten) {
                shape = vec![x.len()];
            }
        }
        Ok(x)
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn dense(x: &[f64], weights: &[f64], bias: &[f64], inputs: usize) -> Vec<f64> {
    bias.iter()
        .zip(weights.chunks_exact(inputs))
        .map(|(&b, row)| row.iter().zip(x).fold(b, |acc, (w, v)| acc + w * v))
        .collect()
}

fn conv2d_valid(x: &[f64], shape: &[usize], kernels: &[f64], bias: &[f64], kh: usize, kw: usize) -> (Vec<f64>, Vec<usize>) {
    let (h, w, cin) = (shape[0], shape[1], shape[2]);
    let (oh, ow, cout) = (h - kh + 1, w - kw + 1, bias.len());
    let patch_len = kh * kw * cin;
    let mut patch = vec![0.0; patch_len];
    let mut y = Vec::with_capacity(oh * ow * cout);
    for oy in 0..oh {
        for ox in 0..ow {
            for ky in 0..kh {
                let row = ((oy + ky) * w + ox) * cin;
                patch[ky * kw * cin..(ky + 1) * kw * cin].copy_from_slice(&x[row..row + kw * cin]);
            }
            for (co, k) in kernels.chunks_exact(patch_len).enumerate() {
                y.push(patch.iter().zip(k).fold(bias[co], |acc, (p, w)| acc + p * w));
            }
        }
    }
    (y, vec![oh, ow, cout])
}

fn max_pool2d(x: &[f64], shape: &[usize], s: usize) -> (Vec<f64>, Vec<usize>) {
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h / s, w / s);
    let mut y = Vec::with_capacity(oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..s {
                    for dx in 0..s {
                        let v = x[((oy * s + dy) * w + ox * s + dx) * c + ch];
                        // NaN wins so corruption is not silently masked.
                        if v > m || v.is_nan() {
                            m = v;
                        }
                        if m.is_nan() {
                            break;
                        }
                    }
                }
                y.push(m);
            }
        }
    }
    (y, vec![oh, ow, c])
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Ordering of class scores: larger first, NaN last, ties by lower index.
fn outranks(a: (usize, f64), b: (usize, f64)) -> bool {
    let key = |v: f64| if v.is_nan() { None } else { Some(v) };
    match key(a.1).partial_cmp(&key(b.1)) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Equal) => a.0 < b.0,
        _ => false,
    }
}

/// True when `label` is among the `k` top-ranked outputs.
pub fn in_top_k(outputs: &[f64], label: usize, k: usize) -> bool {
    let Some(&own) = outputs.get(label) else { return false };
    let ahead = outputs
        .iter()
        .enumerate()
        .filter(|&(j, &v)| outranks((j, v), (label, own)))
        .count();
    ahead < k
}

/// Number of samples whose label is in the top `k` outputs.
pub fn count_correct(net: &Network, data: &LabeledDataset, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidConfig("top-k needs k >= 1".into()));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dims() != net.input_len() {
        return Err(Error::Shape {
            layer: 0,
            message: format!("dataset has {} features, network expects {:?}", data.dims(), net.input_shape()),
        });
    }
    let mut correct = 0;
    for (x, label) in data.iter() {
        let out = net.forward(&x)?;
        if usize::from(label) >= out.len() {
            return Err(Error::InvalidConfig(format!("label {label} exceeds {} outputs", out.len())));
        }
        correct += usize::from(in_top_k(&out, label.into(), k));
    }
    Ok(correct)
}

pub fn evaluate_accuracy(net: &Network, data: &LabeledDataset, k: usize) -> Result<f64> {
    Ok(count_correct(net, data, k)? as f64 / data.len() as f64)
}

/// Decodes `bundle` and runs one input through it.
pub fn forward(bundle: &ModelBundle, input: &[f64]) -> Result<Vec<f64>> {
    Network::from_bundle(bundle, DecodeOptions::default())?.forward(input)
}
