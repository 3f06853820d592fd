//! Even-parity check bit per stored word, and zero-fill of words that fail it.
//!
//! A parity word of width `q` carries the data word in bits `0..q-1` and the
//! check bit at position `q - 1` (the most significant bit).

use crate::codec::{self, BitWord, CodecSpec, QuantizationGrid};
use crate::error::{Error, Result};

/// Value substituted for a weight whose parity check fails.
pub const NULL_VALUE: f64 = 0.0;

/// Appends the XOR of all data bits as the new top bit.
pub fn parity_encode(data: &BitWord) -> Result<BitWord> {
    let width = data.width();
    if width >= 64 {
        return Err(Error::Domain("data word too wide to take a check bit".into()));
    }
    let check = u64::from(data.weight() & 1);
    BitWord::new(width + 1, data.bits() | (check << width))
}

/// True when the word has even Hamming weight.
pub fn parity_ok(word: &BitWord) -> bool {
    word.weight().is_multiple_of(2)
}

/// Drops the check bit.
pub fn strip_check_bit(word: &BitWord) -> Result<BitWord> {
    if word.width() < 2 {
        return Err(Error::Domain("parity word needs at least 2 bits".into()));
    }
    BitWord::new(word.width() - 1, word.bits() & codec::mask(word.width() - 1))
}

/// Decodes a parity-wrapped word. Odd parity yields `(0.0, true)`.
///
/// `grid` is the grid of the data word (its `q` is `spec.data_width()`).
pub fn parity_decode(word: &BitWord, spec: &CodecSpec, grid: &QuantizationGrid) -> Result<(f64, bool)> {
    if !spec.parity() {
        return Err(Error::InvalidSpec(format!("{spec} has no check bit")));
    }
    if word.width() != spec.q() {
        return Err(Error::WidthMismatch { expected: spec.q(), actual: word.width() });
    }
    if !parity_ok(word) {
        return Ok((NULL_VALUE, true));
    }
    let data = strip_check_bit(word)?;
    let index = codec::word_to_index(spec, &data)?;
    Ok((grid.reconstruct_value(index)?, false))
}
