//! Hamming-weight ranked bijection.
//!
//! Words are ordered by ascending Hamming weight, ties broken by ascending
//! lexicographic order of the most-significant-bit-first string (which is the
//! same as ascending numeric value). The index of a word is its position in
//! that order, computed with the combinatorial number system.

use std::sync::OnceLock;

const N: usize = 65;

fn table() -> &'static [[u64; N]; N] {
    static TABLE: OnceLock<[[u64; N]; N]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0u64; N]; N];
        for n in 0..N {
            t[n][0] = 1;
            for k in 1..=n {
                // Largest entry is C(64, 32) < 2^61.
                t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
            }
        }
        t
    })
}

/// Exact binomial coefficient for `n <= 64`; zero when `k > n`.
pub fn binomial(n: u32, k: u32) -> u64 {
    assert!(n <= 64, "binomial table covers n <= 64");
    if k > n {
        0
    } else {
        table()[n as usize][k as usize]
    }
}

/// Number of `width`-bit words with Hamming weight below `weight`.
pub fn class_offset(width: u32, weight: u32) -> u128 {
    (0..weight).map(|j| u128::from(binomial(width, j))).sum()
}

/// Rank of `bits` among the words of its own weight class.
pub fn rank_in_class(bits: u64) -> u64 {
    let mut r = 0u64;
    let mut rest = bits;
    let mut j = 1;
    while rest != 0 {
        let p = rest.trailing_zeros();
        r += binomial(p, j);
        rest &= rest - 1;
        j += 1;
    }
    r
}

/// Word of weight `weight` (out of `width` bits) with in-class rank `r`.
pub fn unrank_in_class(width: u32, weight: u32, mut r: u64) -> u64 {
    let mut bits = 0u64;
    let mut top = width;
    for j in (1..=weight).rev() {
        // Largest position p < top with C(p, j) <= r; p >= j - 1 always qualifies.
        let mut p = top - 1;
        while binomial(p, j) > r {
            p -= 1;
        }
        bits |= 1u64 << p;
        r -= binomial(p, j);
        top = p;
    }
    bits
}

pub(crate) fn rank(width: u32, bits: u64) -> u64 {
    let offset = class_offset(width, bits.count_ones());
    (offset + u128::from(rank_in_class(bits))) as u64
}

pub(crate) fn unrank(width: u32, index: u64) -> u64 {
    let mut remaining = u128::from(index);
    for weight in 0..=width {
        let size = u128::from(binomial(width, weight));
        if remaining < size {
            return unrank_in_class(width, weight, remaining as u64);
        }
        remaining -= size;
    }
    unreachable!("index checked against 2^width by the caller")
}
