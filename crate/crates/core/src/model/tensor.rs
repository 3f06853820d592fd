use serde::{Deserialize, Serialize};

use crate::channel::BitStream;
use crate::codec::{self, BitWord, CodecKind, CodecSpec, QuantizationGrid};
use crate::error::{Error, Result};
use crate::nulling;

/// Real-valued tensor in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloatTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl FloatTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let count: usize = shape.iter().product();
        if count != values.len() {
            return Err(Error::Format(format!(
                "tensor `{name}`: shape {shape:?} holds {count} elements, got {}",
                values.len()
            )));
        }
        Ok(Self { name, shape, values })
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        self.values.iter().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Replace NaN / infinity from corrupted binary16 words with 0.
    pub sanitize: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub values: Vec<f64>,
    /// Words whose parity check failed and were decoded as zero.
    pub nulled: usize,
}

/// Stored form of one tensor: `count * q` bits, word `e` occupying bits
/// `e*q .. (e+1)*q` of the packed stream with its bit 0 first.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedTensor {
    name: String,
    shape: Vec<usize>,
    grid: QuantizationGrid,
    spec: CodecSpec,
    words: BitStream,
}

impl QuantizedTensor {
    /// `grid.q()` must equal `spec.data_width()`.
    pub fn new(
        name: impl Into<String>,
        shape: Vec<usize>,
        grid: QuantizationGrid,
        spec: CodecSpec,
        words: BitStream,
    ) -> Result<Self> {
        let name = name.into();
        if grid.q() != spec.data_width() {
            return Err(Error::InvalidSpec(format!(
                "tensor `{name}`: grid has {} bits, codec {spec} carries {}",
                grid.q(),
                spec.data_width()
            )));
        }
        let count: usize = shape.iter().product();
        let expected = count
            .checked_mul(spec.q() as usize)
            .ok_or_else(|| Error::Format(format!("tensor `{name}` is too large")))?;
        if words.len() != expected {
            return Err(Error::Format(format!(
                "tensor `{name}`: {} stored bits, expected {expected}",
                words.len()
            )));
        }
        Ok(Self { name, shape, grid, spec, words })
    }

    /// Quantizes and packs `values`.
    pub fn encode(
        name: impl Into<String>,
        shape: Vec<usize>,
        values: &[f64],
        spec: CodecSpec,
        grid: QuantizationGrid,
    ) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != values.len() {
            return Err(Error::Format(format!(
                "shape {shape:?} holds {count} elements, got {}",
                values.len()
            )));
        }
        let q = spec.q();
        let mut words = BitStream::zeros(count * q as usize);
        for (e, &v) in values.iter().enumerate() {
            let word = encode_value(v, &spec, &grid)?;
            words.write(e * q as usize, q, word.bits());
        }
        Self::new(name, shape, grid, spec, words)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn grid(&self) -> &QuantizationGrid {
        &self.grid
    }

    pub fn spec(&self) -> &CodecSpec {
        &self.spec
    }

    pub fn words(&self) -> &BitStream {
        &self.words
    }

    pub fn element_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub(crate) fn replace_words(&mut self, words: BitStream) {
        assert_eq!(words.len(), self.words.len());
        self.words = words;
    }

    pub fn word(&self, e: usize) -> BitWord {
        let q = self.spec.q();
        BitWord::new_unchecked(q, self.words.read(e * q as usize, q))
    }

    pub fn dequantize(&self, opts: DecodeOptions) -> Result<Decoded> {
        let mut nulled = 0;
        let mut values = Vec::with_capacity(self.element_count());
        for e in 0..self.element_count() {
            let (v, n) = decode_word(&self.word(e), &self.spec, &self.grid)?;
            nulled += usize::from(n);
            values.push(if opts.sanitize && !v.is_finite() { 0.0 } else { v });
        }
        Ok(Decoded { values, nulled })
    }
}

/// Stored word for one weight, including the check bit when `spec.parity()`.
pub fn encode_value(w: f64, spec: &CodecSpec, grid: &QuantizationGrid) -> Result<BitWord> {
    if spec.kind() == CodecKind::IeeeHalf {
        return codec::half_encode(w);
    }
    let data = codec::index_to_word(spec, grid.quantize_index(w)?)?;
    if spec.parity() {
        nulling::parity_encode(&data)
    } else {
        Ok(data)
    }
}

/// Decoded value and whether it was nulled by a failed parity check.
pub fn decode_word(word: &BitWord, spec: &CodecSpec, grid: &QuantizationGrid) -> Result<(f64, bool)> {
    match spec.kind() {
        CodecKind::IeeeHalf => Ok((codec::half_decode(word)?, false)),
        _ if spec.parity() => nulling::parity_decode(word, spec, grid),
        _ => Ok((grid.reconstruct_value(codec::word_to_index(spec, word)?)?, false)),
    }
}
