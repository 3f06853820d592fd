use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::{Decoded, DecodeOptions, FloatTensor, QuantizedTensor};
use crate::codec::{CodecSpec, QuantizationGrid};
use crate::error::{Error, Result};

/// Metadata key holding the comma-separated input shape, e.g. `28,28,1`.
pub const INPUT_SHAPE_KEY: &str = "input_shape";

/// Half-width added around a constant tensor's value to form a valid grid.
pub const CONSTANT_GRID_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
}

/// One step of the feedforward pipeline.
///
/// Dense weights are `[out, in]`; Conv2D kernels are `[kh, kw, in_channels,
/// out_channels]` applied with stride 1 and valid padding to `[h, w, c]` inputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense { weights: String, bias: String },
    Conv2d { kernels: String, bias: String },
    MaxPool2d { window: usize },
    Activation { kind: ActivationKind },
    Flatten,
    Softmax,
}

impl Layer {
    pub fn tensor_refs(&self) -> Vec<&str> {
        match self {
            Layer::Dense { weights, bias } => vec![weights, bias],
            Layer::Conv2d { kernels, bias } => vec![kernels, bias],
            _ => Vec::new(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Layer::Dense { weights, bias } => format!("dense({weights}, {bias})"),
            Layer::Conv2d { kernels, bias } => format!("conv2d({kernels}, {bias})"),
            Layer::MaxPool2d { window } => format!("maxpool2d({window})"),
            Layer::Activation { kind: ActivationKind::Relu } => "relu".into(),
            Layer::Activation { kind: ActivationKind::Sigmoid } => "sigmoid".into(),
            Layer::Flatten => "flatten".into(),
            Layer::Softmax => "softmax".into(),
        }
    }
}

fn shape_err(layer: usize, message: impl Into<String>) -> Error {
    Error::Shape { layer, message: message.into() }
}

/// Walks the layer list from `input` and returns the shape after each layer.
pub fn infer_shapes<'a>(
    layers: &[Layer],
    input: &[usize],
    lookup: impl Fn(&str) -> Option<&'a [usize]>,
) -> Result<Vec<Vec<usize>>> {
    let param = |i: usize, name: &str| {
        lookup(name).ok_or_else(|| shape_err(i, format!("tensor `{name}` is not in the bundle")))
    };
    let mut shape = input.to_vec();
    let mut out = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        shape = match layer {
            Layer::Dense { weights, bias } => {
                let w = param(i, weights)?;
                let b = param(i, bias)?;
                if w.len() != 2 {
                    return Err(shape_err(i, format!("dense weights must be [out, in], got {w:?}")));
                }
                if b != [w[0]] {
                    return Err(shape_err(i, format!("dense bias {b:?} does not match {} outputs", w[0])));
                }
                if shape != [w[1]] {
                    return Err(shape_err(i, format!("dense expects input [{}], got {shape:?}", w[1])));
                }
                vec![w[0]]
            }
            Layer::Conv2d { kernels, bias } => {
                let k = param(i, kernels)?;
                let b = param(i, bias)?;
                if k.len() != 4 {
                    return Err(shape_err(i, format!("conv kernels must be [kh, kw, cin, cout], got {k:?}")));
                }
                if b != [k[3]] {
                    return Err(shape_err(i, format!("conv bias {b:?} does not match {} channels", k[3])));
                }
                if shape.len() != 3 || shape[2] != k[2] || shape[0] < k[0] || shape[1] < k[1] {
                    return Err(shape_err(
                        i,
                        format!("conv with kernels {k:?} cannot take input {shape:?}"),
                    ));
                }
                vec![shape[0] - k[0] + 1, shape[1] - k[1] + 1, k[3]]
            }
            Layer::MaxPool2d { window } => {
                let s = *window;
                if s == 0 || shape.len() != 3 || shape[0] < s || shape[1] < s {
                    return Err(shape_err(i, format!("maxpool({s}) cannot take input {shape:?}")));
                }
                vec![shape[0] / s, shape[1] / s, shape[2]]
            }
            Layer::Flatten => vec![shape.iter().product()],
            Layer::Activation { .. } => shape,
            Layer::Softmax => {
                if shape.len() != 1 {
                    return Err(shape_err(i, format!("softmax expects a vector, got {shape:?}")));
                }
                shape
            }
        };
        out.push(shape.clone());
    }
    Ok(out)
}

/// Input shape from metadata, else `[in]` of a leading dense layer.
fn resolve_input_shape<'a>(
    layers: &[Layer],
    metadata: &BTreeMap<String, String>,
    lookup: impl Fn(&str) -> Option<&'a [usize]>,
) -> Result<Vec<usize>> {
    if let Some(s) = metadata.get(INPUT_SHAPE_KEY) {
        return s
            .split(',')
            .map(|d| d.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("bad {INPUT_SHAPE_KEY} `{s}`: {e}")));
    }
    for layer in layers {
        match layer {
            Layer::Dense { weights, .. } => {
                let w = lookup(weights).ok_or_else(|| Error::UnknownTensor(weights.clone()))?;
                return w
                    .get(1)
                    .map(|&n| vec![n])
                    .ok_or_else(|| Error::Format(format!("dense weights `{weights}` are not 2-D")));
            }
            Layer::Activation { .. } | Layer::Flatten => continue,
            _ => break,
        }
    }
    Err(Error::Format(format!(
        "cannot infer the input shape; set metadata `{INPUT_SHAPE_KEY}`"
    )))
}

/// A real-valued network: layers plus named tensors. Source for quantization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatModel {
    pub layers: Vec<Layer>,
    pub tensors: Vec<FloatTensor>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl FloatModel {
    pub fn tensor(&self, name: &str) -> Option<&FloatTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn input_shape(&self) -> Result<Vec<usize>> {
        resolve_input_shape(&self.layers, &self.metadata, |n| self.tensor(n).map(|t| t.shape.as_slice()))
    }

    pub fn validate(&self) -> Result<Vec<Vec<usize>>> {
        check_unique(self.tensors.iter().map(|t| t.name.as_str()))?;
        for t in &self.tensors {
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("tensor `{}` has non-finite values", t.name)));
            }
        }
        infer_shapes(&self.layers, &self.input_shape()?, |n| self.tensor(n).map(|t| t.shape.as_slice()))
    }
}

fn check_unique<'a>(names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::Format(format!("duplicate tensor name `{n}`")));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPolicy {
    /// Each tensor uses its own `[min, max]`.
    #[default]
    PerTensor,
    /// One `[min, max]` over every tensor of the model.
    Global,
}

/// Layers, quantized tensors (in storage order) and free-form metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    layers: Vec<Layer>,
    tensors: Vec<QuantizedTensor>,
    metadata: BTreeMap<String, String>,
}

impl ModelBundle {
    pub fn new(
        layers: Vec<Layer>,
        tensors: Vec<QuantizedTensor>,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        let bundle = Self { layers, tensors, metadata };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn tensors(&self) -> &[QuantizedTensor] {
        &self.tensors
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [QuantizedTensor] {
        &mut self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&QuantizedTensor> {
        self.tensors.iter().find(|t| t.name() == name)
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.element_count()).sum()
    }

    pub fn stored_bits(&self) -> usize {
        self.tensors.iter().map(|t| t.words().len()).sum()
    }

    pub fn input_shape(&self) -> Result<Vec<usize>> {
        resolve_input_shape(&self.layers, &self.metadata, |n| self.tensor(n).map(|t| t.shape()))
    }

    /// Checks tensor references and layer shape compatibility; returns the
    /// output shape of every layer.
    pub fn validate(&self) -> Result<Vec<Vec<usize>>> {
        check_unique(self.tensors.iter().map(|t| t.name()))?;
        infer_shapes(&self.layers, &self.input_shape()?, |n| self.tensor(n).map(|t| t.shape()))
    }

    /// Decodes every tensor to real values.
    pub fn dequantize(&self, opts: DecodeOptions) -> Result<Vec<(String, Vec<usize>, Decoded)>> {
        self.tensors
            .iter()
            .map(|t| Ok((t.name().to_owned(), t.shape().to_vec(), t.dequantize(opts)?)))
            .collect()
    }

    /// Decodes back into a real-valued model (nulled words become zeros).
    pub fn to_float_model(&self, opts: DecodeOptions) -> Result<FloatModel> {
        let tensors = self
            .dequantize(opts)?
            .into_iter()
            .map(|(name, shape, d)| FloatTensor { name, shape, values: d.values })
            .collect();
        Ok(FloatModel { layers: self.layers.clone(), tensors, metadata: self.metadata.clone() })
    }

    /// Re-encodes every tensor with the codec returned by `respec`, keeping
    /// each tensor's range. Values are first decoded, so this is lossless only
    /// when the new codec is at least as fine as the old one.
    pub fn requantize(&self, respec: impl Fn(&QuantizedTensor) -> Result<CodecSpec>) -> Result<ModelBundle> {
        let mut tensors = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            let spec = respec(t)?;
            let values = t.dequantize(DecodeOptions::default())?.values;
            let grid = QuantizationGrid::new(t.grid().w_min(), t.grid().w_max(), spec.data_width())?;
            tensors.push(QuantizedTensor::encode(t.name(), t.shape().to_vec(), &values, spec, grid)?);
        }
        ModelBundle::new(self.layers.clone(), tensors, self.metadata.clone())
    }
}

/// Quantizes every tensor of `model` with `spec` under the given grid policy.
///
/// A constant tensor (or model, under [`GridPolicy::Global`]) gets its grid
/// widened by [`CONSTANT_GRID_EPSILON`] on both sides; this is recorded in the
/// bundle metadata as `grid_widened.<name>`.
pub fn quantize_model(model: &FloatModel, spec: CodecSpec, policy: GridPolicy) -> Result<ModelBundle> {
    model.validate()?;
    let mut metadata = model.metadata.clone();
    let global = model
        .tensors
        .iter()
        .filter_map(FloatTensor::min_max)
        .reduce(|a, b| (a.0.min(b.0), a.1.max(b.1)));

    let mut tensors = Vec::with_capacity(model.tensors.len());
    for t in &model.tensors {
        let range = match policy {
            GridPolicy::PerTensor => t.min_max(),
            GridPolicy::Global => global,
        };
        let (mut lo, mut hi) = range.unwrap_or((0.0, 0.0));
        if lo >= hi {
            lo -= CONSTANT_GRID_EPSILON;
            hi += CONSTANT_GRID_EPSILON;
            metadata.insert(format!("grid_widened.{}", t.name), CONSTANT_GRID_EPSILON.to_string());
        }
        let grid = QuantizationGrid::new(lo, hi, spec.data_width())?;
        tensors.push(QuantizedTensor::encode(t.name.clone(), t.shape.clone(), &t.values, spec, grid)?);
    }
    metadata.insert("codec".into(), spec.to_string());
    metadata.insert(
        "grid_policy".into(),
        match policy {
            GridPolicy::PerTensor => "per_tensor",
            GridPolicy::Global => "global",
        }
        .into(),
    );
    ModelBundle::new(model.layers.clone(), tensors, metadata)
}
