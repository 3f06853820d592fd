//! IEEE-754 binary16: 1 sign bit, 5 exponent bits (bias 15), 10 significand bits.

use super::BitWord;
use crate::error::{Error, Result};

/// Largest finite binary16 value, `(2 - 2^-10) * 2^15`.
pub const HALF_MAX: f64 = 65504.0;

/// Encodes `w` with round-to-nearest-even, subnormals included.
pub fn half_encode(w: f64) -> Result<BitWord> {
    if !w.is_finite() {
        return Err(Error::Domain(format!("cannot encode non-finite value {w}")));
    }
    if w.abs() > HALF_MAX {
        return Err(Error::HalfOverflow(w));
    }
    let sign: u64 = if w.is_sign_negative() { 0x8000 } else { 0 };
    let a = w.abs();
    let bits = a.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32 - 1023;

    let magnitude = if a == 0.0 {
        0
    } else if exp >= -14 {
        let full = (1u64 << 52) | (bits & ((1u64 << 52) - 1));
        let mut mant = full >> 42;
        let rem = full & ((1u64 << 42) - 1);
        let halfway = 1u64 << 41;
        if rem > halfway || (rem == halfway && mant & 1 == 1) {
            mant += 1;
        }
        let mut e = (exp + 15) as u64;
        if mant == 1 << 11 {
            mant >>= 1;
            e += 1;
        }
        // |w| <= 65504 keeps e <= 30.
        (e << 10) | (mant & 0x3ff)
    } else {
        // Subnormal: count units of 2^-24; 1024 units rolls into the smallest normal.
        (a * 2f64.powi(24)).round_ties_even() as u64
    };
    Ok(BitWord::new_unchecked(16, sign | magnitude))
}

/// Decodes a 16-bit word. All-ones exponents decode to ±infinity or NaN as stored.
pub fn half_decode(word: &BitWord) -> Result<f64> {
    if word.width() != 16 {
        return Err(Error::WidthMismatch { expected: 16, actual: word.width() });
    }
    Ok(decode_bits(word.bits() as u16))
}

pub(crate) fn decode_bits(h: u16) -> f64 {
    let sign = if h & 0x8000 != 0 { -1.0 } else { 1.0 };
    let exp = ((h >> 10) & 0x1f) as i32;
    let mant = (h & 0x3ff) as f64;
    let magnitude = match exp {
        0 => mant * 2f64.powi(-24),
        0x1f if mant == 0.0 => f64::INFINITY,
        0x1f => f64::NAN,
        _ => (1.0 + mant / 1024.0) * 2f64.powi(exp - 15),
    };
    sign * magnitude
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word(s: &str) -> BitWord {
        BitWord::from_msb_str(s).unwrap()
    }

    #[test]
    fn exponent_flip_example() {
        let w = word("0 01101 0101010101");
        assert_eq!(half_decode(&w).unwrap(), 0.333251953125);
        assert_eq!(half_encode(0.333251953125).unwrap(), w);
        let flipped = word("0 11101 0101010101");
        assert_eq!(flipped, w.flipped(1 << 14));
        assert_eq!(half_decode(&flipped).unwrap(), 21840.0);
    }

    #[test]
    fn max_value_and_overflow() {
        let w = half_encode(65504.0).unwrap();
        assert_eq!(w, word("0 11110 1111111111"));
        assert_eq!(half_decode(&w).unwrap(), 65504.0);
        assert!(matches!(half_encode(65504.5), Err(Error::HalfOverflow(_))));
        assert!(half_encode(f64::NAN).is_err());
    }

    #[test]
    fn zero_subnormal_and_specials() {
        assert_eq!(half_encode(0.0).unwrap().bits(), 0);
        assert_eq!(half_encode(-0.0).unwrap().bits(), 0x8000);
        assert_eq!(half_encode(2f64.powi(-24)).unwrap().bits(), 1);
        // Half of the smallest subnormal ties to even (zero).
        assert_eq!(half_encode(2f64.powi(-25)).unwrap().bits(), 0);
        assert_eq!(half_decode(&BitWord::new(16, 0x7c00).unwrap()).unwrap(), f64::INFINITY);
        assert!(half_decode(&BitWord::new(16, 0x7e00).unwrap()).unwrap().is_nan());
        assert!(half_decode(&BitWord::new(8, 0).unwrap()).is_err());
    }
}
