//! Binary symmetric channel over packed bit streams and model bundles.
//!
//! Every corrupted stream draws from its own ChaCha8 generator seeded with
//! [`stream_seed`]`(master_seed, trial, stream)`. For bundles the stream id is
//! the tensor's position in the bundle, so a tensor sees the same flip pattern
//! whether it is corrupted alone or together with the rest of the model.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelBundle;

/// Name of the seed derivation, echoed in sweep output.
pub const SEED_DERIVATION: &str = "splitmix64(master ^ trial, stream) -> chacha8";

/// Packed bit sequence; bit `p` lives in byte `p / 8` at bit `p % 8`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BitStream {
    bytes: Vec<u8>,
    len: usize,
}

impl BitStream {
    pub fn zeros(len: usize) -> Self {
        Self { bytes: vec![0; len.div_ceil(8)], len }
    }

    /// Wraps `bytes` holding `len` bits. Padding bits past `len` must be zero.
    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Format(format!(
                "{} bytes cannot hold exactly {len} bits",
                bytes.len()
            )));
        }
        if !len.is_multiple_of(8) {
            let last = bytes[bytes.len() - 1];
            if last >> (len % 8) != 0 {
                return Err(Error::Format("nonzero padding bits".into()));
            }
        }
        Ok(Self { bytes, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, p: usize) -> bool {
        assert!(p < self.len, "bit {p} out of range {}", self.len);
        (self.bytes[p / 8] >> (p % 8)) & 1 == 1
    }

    pub fn flip(&mut self, p: usize) {
        assert!(p < self.len, "bit {p} out of range {}", self.len);
        self.bytes[p / 8] ^= 1 << (p % 8);
    }

    /// Reads `width` bits starting at `offset`, first bit as bit 0 of the result.
    pub fn read(&self, offset: usize, width: u32) -> u64 {
        assert!(offset + width as usize <= self.len);
        let mut v = 0u64;
        for j in 0..width as usize {
            let p = offset + j;
            v |= u64::from((self.bytes[p / 8] >> (p % 8)) & 1) << j;
        }
        v
    }

    pub fn write(&mut self, offset: usize, width: u32, value: u64) {
        assert!(offset + width as usize <= self.len);
        for j in 0..width as usize {
            let p = offset + j;
            let bit = ((value >> j) & 1) as u8;
            self.bytes[p / 8] = (self.bytes[p / 8] & !(1 << (p % 8))) | (bit << (p % 8));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.bytes.iter().map(|b| u64::from(b.count_ones())).sum()
    }

    /// Number of positions where the two streams differ.
    pub fn hamming_distance(&self, other: &BitStream) -> u64 {
        assert_eq!(self.len, other.len);
        self.bytes
            .iter()
            .zip(&other.bytes)
            .map(|(a, b)| u64::from((a ^ b).count_ones()))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BscChannel {
    rber: f64,
    master_seed: u64,
}

impl BscChannel {
    pub fn new(rber: f64, master_seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rber) {
            return Err(Error::InvalidConfig(format!("rber {rber} not in [0, 1]")));
        }
        Ok(Self { rber, master_seed })
    }

    pub fn rber(&self) -> f64 {
        self.rber
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }
}

/// Which tensors to corrupt, and under which trial index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionTarget {
    /// Empty means every tensor.
    pub tensor_filter: BTreeSet<String>,
    pub trial_index: u64,
}

impl InjectionTarget {
    pub fn all(trial_index: u64) -> Self {
        Self { tensor_filter: BTreeSet::new(), trial_index }
    }

    pub fn only<I, S>(names: I, trial_index: u64) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { tensor_filter: names.into_iter().map(Into::into).collect(), trial_index }
    }

    pub fn selects(&self, name: &str) -> bool {
        self.tensor_filter.is_empty() || self.tensor_filter.contains(name)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the generator for one (master seed, trial, stream) triple.
pub fn stream_seed(master_seed: u64, trial: u64, stream: u64) -> u64 {
    let a = splitmix64(master_seed ^ splitmix64(trial));
    splitmix64(a ^ splitmix64(stream.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Positions of flipped bits in a stream of `len` bits, in ascending order.
///
/// Gaps between flips are geometric: `floor(ln U / ln(1 - p))` with `U` uniform
/// on `(0, 1]`, so the cost scales with the number of flips, not with `len`.
pub fn flip_positions<R: Rng>(rng: &mut R, len: usize, rber: f64) -> Vec<usize> {
    if rber <= 0.0 || len == 0 {
        return Vec::new();
    }
    if rber >= 1.0 {
        return (0..len).collect();
    }
    let log_keep = (-rber).ln_1p();
    let mut out = Vec::new();
    let mut pos = 0usize;
    loop {
        let u = 1.0 - rng.gen::<f64>();
        let gap = (u.ln() / log_keep).floor();
        if gap >= (len - pos) as f64 {
            break;
        }
        pos += gap as usize;
        out.push(pos);
        pos += 1;
        if pos >= len {
            break;
        }
    }
    out
}

/// Per-bit Bernoulli draws; reference for [`flip_positions`].
pub fn flip_positions_bernoulli<R: Rng>(rng: &mut R, len: usize, rber: f64) -> Vec<usize> {
    (0..len).filter(|_| rng.gen::<f64>() < rber).collect()
}

fn corrupt_stream(stream: &BitStream, channel: &BscChannel, trial: u64, stream_id: u64) -> (BitStream, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(channel.master_seed, trial, stream_id));
    let mut out = stream.clone();
    let flips = flip_positions(&mut rng, stream.len(), channel.rber);
    for &p in &flips {
        out.flip(p);
    }
    (out, flips.len() as u64)
}

/// Flips every bit independently with probability `channel.rber()`.
pub fn corrupt_bits(stream: &BitStream, channel: &BscChannel, trial: u64) -> (BitStream, u64) {
    corrupt_stream(stream, channel, trial, 0)
}

/// Corrupts the packed words of the selected tensors; everything else is copied.
pub fn corrupt_bundle(
    bundle: &ModelBundle,
    channel: &BscChannel,
    target: &InjectionTarget,
) -> Result<(ModelBundle, u64)> {
    for name in &target.tensor_filter {
        if bundle.tensor(name).is_none() {
            return Err(Error::UnknownTensor(name.clone()));
        }
    }
    let mut out = bundle.clone();
    let mut total = 0;
    for (ordinal, tensor) in out.tensors_mut().iter_mut().enumerate() {
        if !target.selects(tensor.name()) {
            continue;
        }
        let (words, flips) = corrupt_stream(tensor.words(), channel, target.trial_index, ordinal as u64);
        tensor.replace_words(words);
        total += flips;
    }
    Ok((out, total))
}
