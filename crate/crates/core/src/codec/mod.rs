//! Weight ↔ index ↔ bit-word mappings.
//!
//! A stored weight goes through two steps: [`QuantizationGrid`] turns the real
//! value into an index `i` in `0..2^q`, and a [`CodecKind`] bijection turns the
//! index into a q-bit [`BitWord`]. [`CodecKind::IeeeHalf`] skips the grid and
//! stores the value directly as binary16.

mod grid;
mod half;
pub mod ranked;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::QuantizationGrid;
pub use half::{half_decode, half_encode, HALF_MAX};

/// A word of `width` bits; bit `j` of `bits` holds expansion digit `b_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitWord {
    width: u32,
    bits: u64,
}

impl BitWord {
    pub fn new(width: u32, bits: u64) -> Result<Self> {
        if !(1..=64).contains(&width) {
            return Err(Error::Domain(format!("word width {width} not in 1..=64")));
        }
        if bits & !mask(width) != 0 {
            return Err(Error::Domain(format!(
                "bits {bits:#x} exceed a {width}-bit word"
            )));
        }
        Ok(Self { width, bits })
    }

    /// Parses a most-significant-bit-first string such as `"0101"`.
    /// Spaces and underscores are ignored.
    pub fn from_msb_str(s: &str) -> Result<Self> {
        let mut bits = 0u64;
        let mut width = 0u32;
        for c in s.chars().filter(|c| *c != ' ' && *c != '_') {
            let b = match c {
                '0' => 0,
                '1' => 1,
                _ => return Err(Error::Domain(format!("invalid bit character {c:?}"))),
            };
            if width == 64 {
                return Err(Error::Domain("bit string longer than 64".into()));
            }
            bits = (bits << 1) | b;
            width += 1;
        }
        Self::new(width, bits)
    }

    pub(crate) fn new_unchecked(width: u32, bits: u64) -> Self {
        debug_assert!((1..=64).contains(&width) && bits & !mask(width) == 0);
        Self { width, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn bit(&self, j: u32) -> bool {
        j < self.width && (self.bits >> j) & 1 == 1
    }

    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn hamming_distance(&self, other: &BitWord) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }

    /// Returns the word with every bit set in `flips` inverted.
    pub fn flipped(&self, flips: u64) -> BitWord {
        BitWord::new_unchecked(self.width, (self.bits ^ flips) & mask(self.width))
    }
}

impl fmt::Display for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in (0..self.width).rev() {
            f.write_str(if self.bit(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// All-ones mask of the low `width` bits.
pub(crate) fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    BinaryExpansion,
    GrayCode,
    HammingRanked,
    IeeeHalf,
}

impl CodecKind {
    pub const ALL: [CodecKind; 4] = [
        CodecKind::BinaryExpansion,
        CodecKind::GrayCode,
        CodecKind::HammingRanked,
        CodecKind::IeeeHalf,
    ];

    /// Identifier used in the NNSB file format.
    pub fn id(self) -> u8 {
        match self {
            CodecKind::BinaryExpansion => 0,
            CodecKind::GrayCode => 1,
            CodecKind::HammingRanked => 2,
            CodecKind::IeeeHalf => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == id)
            .ok_or_else(|| Error::Format(format!("unknown codec id {id}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            CodecKind::BinaryExpansion => "binary",
            CodecKind::GrayCode => "gray",
            CodecKind::HammingRanked => "hamming",
            CodecKind::IeeeHalf => "half",
        }
    }

    pub fn is_index_codec(self) -> bool {
        self != CodecKind::IeeeHalf
    }
}

impl fmt::Display for CodecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CodecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "binary_expansion" | "binary-expansion" => Ok(CodecKind::BinaryExpansion),
            "gray" | "gray_code" | "gray-code" => Ok(CodecKind::GrayCode),
            "hamming" | "hamming_ranked" | "hamming-ranked" | "hdb" => Ok(CodecKind::HammingRanked),
            "half" | "ieee_half" | "ieee-half" | "f16" => Ok(CodecKind::IeeeHalf),
            other => Err(Error::InvalidSpec(format!("unknown codec `{other}`"))),
        }
    }
}

/// Which bijection stores a tensor, its total stored width `q`, and whether the
/// top bit of each word is an even-parity check bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodecSpec {
    kind: CodecKind,
    q: u32,
    parity: bool,
}

impl CodecSpec {
    pub fn new(kind: CodecKind, q: u32, parity: bool) -> Result<Self> {
        if kind == CodecKind::IeeeHalf {
            if q != 16 {
                return Err(Error::InvalidSpec(format!("ieee half requires q = 16, got {q}")));
            }
            if parity {
                return Err(Error::InvalidSpec("parity is not defined for ieee half".into()));
            }
        }
        if !(1..=64).contains(&q) {
            return Err(Error::InvalidSpec(format!("q = {q} not in 1..=64")));
        }
        if parity && q < 2 {
            return Err(Error::InvalidSpec("parity needs at least 2 stored bits".into()));
        }
        Ok(Self { kind, q, parity })
    }

    pub fn half() -> Self {
        Self { kind: CodecKind::IeeeHalf, q: 16, parity: false }
    }

    pub fn kind(&self) -> CodecKind {
        self.kind
    }

    /// Total stored bits per weight, including the check bit.
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn parity(&self) -> bool {
        self.parity
    }

    /// Bits carrying the index: `q - 1` with parity, `q` otherwise.
    pub fn data_width(&self) -> u32 {
        self.q - u32::from(self.parity)
    }

    /// Number of representable indices, `2^data_width`.
    pub fn index_count(&self) -> u128 {
        1u128 << self.data_width()
    }

    /// The same bijection without the check bit, at the data width.
    pub fn data_spec(&self) -> CodecSpec {
        CodecSpec { kind: self.kind, q: self.data_width(), parity: false }
    }
}

impl fmt::Display for CodecSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/q{}", self.kind, self.q)?;
        if self.parity {
            f.write_str("+parity")?;
        }
        Ok(())
    }
}

fn check_index(i: u64, width: u32) -> Result<()> {
    if width < 64 && i >> width != 0 {
        return Err(Error::IndexOutOfRange { index: i, width });
    }
    Ok(())
}

/// Maps index `i` to its data word under `spec`'s bijection.
///
/// The returned word has the data width; parity wrapping is applied by
/// [`crate::nulling::parity_encode`].
pub fn index_to_word(spec: &CodecSpec, i: u64) -> Result<BitWord> {
    let width = spec.data_width();
    check_index(i, width)?;
    let bits = match spec.kind {
        CodecKind::BinaryExpansion => i,
        CodecKind::GrayCode => i ^ (i >> 1),
        CodecKind::HammingRanked => ranked::unrank(width, i),
        CodecKind::IeeeHalf => {
            return Err(Error::InvalidSpec("ieee half has no index bijection".into()))
        }
    };
    Ok(BitWord::new_unchecked(width, bits))
}

/// Inverse of [`index_to_word`].
pub fn word_to_index(spec: &CodecSpec, word: &BitWord) -> Result<u64> {
    let width = spec.data_width();
    if word.width != width {
        return Err(Error::WidthMismatch { expected: width, actual: word.width });
    }
    let b = word.bits;
    Ok(match spec.kind {
        CodecKind::BinaryExpansion => b,
        CodecKind::GrayCode => gray_decode(b),
        CodecKind::HammingRanked => ranked::rank(width, b),
        CodecKind::IeeeHalf => {
            return Err(Error::InvalidSpec("ieee half has no index bijection".into()))
        }
    })
}

fn gray_decode(mut g: u64) -> u64 {
    let mut shift = 1;
    while shift < 64 {
        g ^= g >> shift;
        shift <<= 1;
    }
    g
}
