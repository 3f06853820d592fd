//! Index distortion caused by bit flips under a word ↔ index bijection.
//!
//! The distortion between two words is `|f(b1) - f(b2)| / 2^q`. Profiles take
//! the maximum and the mean of that quantity over each word's Hamming
//! neighborhood, then the maximum / mean over all words.

use num_rational::Ratio;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{self, ranked, BitWord, CodecKind, CodecSpec};
use crate::error::{Error, Result};

/// Exact distortion value; denominators are powers of two times neighborhood sizes.
pub type Exact = Ratio<u128>;

/// Default cap on `2^q * neighborhood_size` for exhaustive profiles.
pub const DEFAULT_BUDGET: u128 = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// Words at Hamming distance `1..=k`.
    Ball,
    /// Words at Hamming distance exactly `k`.
    Shell,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Max,
    Ave,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Max => "max",
            Mode::Ave => "ave",
        }
    }
}

/// A distortion with its float rendering. `exact` is absent for sampled
/// averages, whose stratified weights do not fit a small rational.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Value {
    #[serde(serialize_with = "ser_ratio")]
    pub exact: Option<Exact>,
    pub float: f64,
}

fn ser_ratio<S: serde::Serializer>(r: &Option<Exact>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&format!("{}/{}", r.numer(), r.denom())),
        None => s.serialize_none(),
    }
}

impl Value {
    fn exact(r: Exact) -> Self {
        Self { exact: Some(r), float: ratio_to_f64(&r) }
    }
}

pub fn ratio_to_f64(r: &Exact) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct DistortionReport {
    pub codec: CodecSpec,
    pub q: u32,
    pub k: u32,
    pub neighborhood: Neighborhood,
    pub d_max: Value,
    pub d_ave: Value,
    pub method: Method,
}

impl DistortionReport {
    pub fn value(&self, mode: Mode) -> &Value {
        match mode {
            Mode::Max => &self.d_max,
            Mode::Ave => &self.d_ave,
        }
    }
}

fn index_spec(spec: &CodecSpec) -> Result<CodecSpec> {
    if spec.kind() == CodecKind::IeeeHalf {
        return Err(Error::InvalidSpec("distortion is defined for index codecs only".into()));
    }
    Ok(spec.data_spec())
}

/// `|f(b1) - f(b2)| / 2^q` as an exact rational.
pub fn pair_distortion(spec: &CodecSpec, b1: &BitWord, b2: &BitWord) -> Result<Exact> {
    let spec = index_spec(spec)?;
    let i1 = codec::word_to_index(&spec, b1)?;
    let i2 = codec::word_to_index(&spec, b2)?;
    Ok(Ratio::new(u128::from(i1.abs_diff(i2)), 1u128 << spec.q()))
}

/// Flip masks of every weight in `weights` over `q` bits.
fn flip_masks(q: u32, weights: std::ops::RangeInclusive<u32>) -> Vec<u64> {
    let mut masks = Vec::new();
    for w in weights {
        let count = ranked::binomial(q, w);
        masks.extend((0..count).map(|r| ranked::unrank_in_class(q, w, r)));
    }
    masks
}

fn distance_range(k: u32, q: u32, neighborhood: Neighborhood) -> Result<std::ops::RangeInclusive<u32>> {
    if k == 0 {
        return Err(Error::InvalidConfig("radius k must be at least 1".into()));
    }
    if k > q {
        return Err(Error::InvalidConfig(format!("radius k = {k} exceeds word width {q}")));
    }
    Ok(match neighborhood {
        Neighborhood::Ball => 1..=k,
        Neighborhood::Shell => k..=k,
    })
}

/// Number of neighbors of one word.
pub fn neighborhood_size(q: u32, k: u32, neighborhood: Neighborhood) -> Result<u128> {
    Ok(distance_range(k, q, neighborhood)?
        .map(|d| u128::from(ranked::binomial(q, d)))
        .sum())
}

pub fn distortion_profile(
    spec: &CodecSpec,
    k: u32,
    neighborhood: Neighborhood,
    method: Method,
) -> Result<DistortionReport> {
    distortion_profile_with_budget(spec, k, neighborhood, method, DEFAULT_BUDGET)
}

pub fn distortion_profile_with_budget(
    spec: &CodecSpec,
    k: u32,
    neighborhood: Neighborhood,
    method: Method,
    budget: u128,
) -> Result<DistortionReport> {
    let ispec = index_spec(spec)?;
    let q = ispec.q();
    let distances = distance_range(k, q, neighborhood)?;
    let (d_max, d_ave) = match method {
        Method::Exhaustive => {
            let n = neighborhood_size(q, k, neighborhood)?;
            let required = (1u128 << q) * n;
            if q > 40 || required > budget {
                return Err(Error::BudgetExceeded { required, budget });
            }
            exhaustive(&ispec, distances, n)?
        }
        Method::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidConfig("sampled profile needs at least one sample".into()));
            }
            sampled(&ispec, distances, samples, seed)?
        }
    };
    Ok(DistortionReport { codec: *spec, q, k, neighborhood, d_max, d_ave, method })
}

fn exhaustive(spec: &CodecSpec, distances: std::ops::RangeInclusive<u32>, n: u128) -> Result<(Value, Value)> {
    let q = spec.q();
    let words = 1u64 << q;
    let table: Vec<u64> = (0..words)
        .map(|b| codec::word_to_index(spec, &BitWord::new_unchecked(q, b)))
        .collect::<Result<_>>()?;
    let masks = flip_masks(q, distances);

    let (max, sum) = table
        .par_iter()
        .enumerate()
        .map(|(b, &ib)| {
            let mut max = 0u64;
            let mut sum = 0u128;
            for &m in &masks {
                let d = ib.abs_diff(table[b ^ m as usize]);
                max = max.max(d);
                sum += u128::from(d);
            }
            (max, sum)
        })
        .reduce(|| (0, 0), |a, b| (a.0.max(b.0), a.1 + b.1));

    let scale = 1u128 << q;
    let d_max = Ratio::new(u128::from(max), scale);
    // Mean over words of the mean over n neighbors, each divided by 2^q.
    let d_ave = Ratio::new(sum, n * scale * scale);
    Ok((Value::exact(d_max), Value::exact(d_ave)))
}

/// Draws a uniform neighbor mask at one of the allowed distances.
fn random_mask<R: Rng>(rng: &mut R, q: u32, distances: &std::ops::RangeInclusive<u32>, total: u128) -> u64 {
    let mut pick = rng.gen_range(0..total);
    let mut dist = *distances.start();
    for d in distances.clone() {
        let size = u128::from(ranked::binomial(q, d));
        if pick < size {
            dist = d;
            break;
        }
        pick -= size;
    }
    index::sample(rng, q as usize, dist as usize)
        .into_iter()
        .fold(0u64, |m, p| m | (1u64 << p))
}

fn random_word<R: Rng>(rng: &mut R, q: u32) -> u64 {
    rng.gen::<u64>() & codec::mask(q)
}

/// Monte-Carlo profile. HammingRanked words are stratified by weight class so
/// the small extreme classes are always visited; other codecs draw uniform words.
fn sampled(spec: &CodecSpec, distances: std::ops::RangeInclusive<u32>, samples: u64, seed: u64) -> Result<(Value, Value)> {
    let q = spec.q();
    let total: u128 = distances.clone().map(|d| u128::from(ranked::binomial(q, d))).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1u128 << q;
    let mut max = 0u64;

    let mut jump = |rng: &mut ChaCha8Rng, b: u64| -> Result<u64> {
        let m = random_mask(rng, q, &distances, total);
        let i1 = codec::word_to_index(spec, &BitWord::new_unchecked(q, b))?;
        let i2 = codec::word_to_index(spec, &BitWord::new_unchecked(q, b ^ m))?;
        let d = i1.abs_diff(i2);
        max = max.max(d);
        Ok(d)
    };

    let ave = if spec.kind() == CodecKind::HammingRanked {
        let per_class = (samples / u64::from(q + 1)).max(1);
        let mut estimate = 0.0;
        for w in 0..=q {
            let class = ranked::binomial(q, w);
            let mut sum = 0u128;
            for _ in 0..per_class {
                let b = ranked::unrank_in_class(q, w, rng.gen_range(0..class));
                sum += u128::from(jump(&mut rng, b)?);
            }
            let class_mean = sum as f64 / per_class as f64 / scale as f64;
            estimate += class_mean * (class as f64 / scale as f64);
        }
        Value { exact: None, float: estimate }
    } else {
        let mut sum = 0u128;
        for _ in 0..samples {
            let b = random_word(&mut rng, q);
            sum += u128::from(jump(&mut rng, b)?);
        }
        let exact = u128::from(samples)
            .checked_mul(scale)
            .map(|den| Ratio::new(sum, den));
        match exact {
            Some(r) => Value::exact(r),
            None => Value { exact: None, float: sum as f64 / samples as f64 / scale as f64 },
        }
    };
    Ok((Value::exact(Ratio::new(u128::from(max), scale)), ave))
}

/// `2 C(q, ceil(q/2)) / 2^q` and its Stirling approximation `2 sqrt(2 / (π q))`.
pub fn hdb_bound(q: u32) -> Result<(Exact, f64)> {
    if !(2..=64).contains(&q) {
        return Err(Error::InvalidConfig(format!("bound defined for 2 <= q <= 64, got {q}")));
    }
    let exact = Ratio::new(2 * u128::from(ranked::binomial(q, q.div_ceil(2))), 1u128 << q);
    let stirling = 2.0 * (2.0 / (std::f64::consts::PI * q as f64)).sqrt();
    Ok((exact, stirling))
}
