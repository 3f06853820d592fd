use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use super::stats::{box_stats, BoxStats};
use crate::channel::{corrupt_bundle, BscChannel, InjectionTarget, SEED_DERIVATION};
use crate::codec::CodecSpec;
use crate::error::{Error, Result};
use crate::model::{count_correct, DecodeOptions, LabeledDataset, ModelBundle, Network};

/// Default robustness threshold: 95% of the undistorted accuracy.
pub const DEFAULT_X: f64 = 0.95;
pub const DEFAULT_TRIALS: u32 = 40;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub rber_grid: Vec<f64>,
    pub trials: u32,
    pub master_seed: u64,
    pub top_k: usize,
    /// Empty means every tensor.
    pub tensor_filter: BTreeSet<String>,
    pub x: f64,
    pub sanitize: bool,
}

impl SweepConfig {
    pub fn new(rber_grid: Vec<f64>, master_seed: u64) -> Self {
        Self {
            rber_grid,
            trials: DEFAULT_TRIALS,
            master_seed,
            top_k: 1,
            tensor_filter: BTreeSet::new(),
            x: DEFAULT_X,
            sanitize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rber_grid.is_empty() {
            return Err(Error::InvalidConfig("rber grid is empty".into()));
        }
        if self.rber_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("rber grid values must lie in [0, 1]".into()));
        }
        if self.rber_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("rber grid must be strictly ascending".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("at least one trial per grid point".into()));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top-k needs k >= 1".into()));
        }
        if !(self.x > 0.0 && self.x <= 1.0) {
            return Err(Error::InvalidConfig(format!("x = {} not in (0, 1]", self.x)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialSample {
    pub trial: u64,
    pub accuracy: f64,
    pub correct: usize,
    pub flips: u64,
    pub nulled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rber: f64,
    pub samples: Vec<TrialSample>,
    /// Mean accuracy, computed from the pooled correct counts.
    pub mean_accuracy: f64,
    pub stats: BoxStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub baseline_accuracy: f64,
    pub robustness: Option<f64>,
    pub points: Vec<SweepPoint>,
    pub dataset_size: usize,
    pub stored_bits: usize,
    pub codecs: BTreeMap<String, CodecSpec>,
    pub seed_derivation: String,
}

/// Largest positive grid rate whose mean accuracy is at least `baseline * x`.
///
/// `None` means no positive grid point qualifies, i.e. the model is not robust
/// at the grid's resolution.
pub fn robustness_from_means(baseline: f64, means: &[(f64, f64)], x: f64) -> Option<f64> {
    let threshold = baseline * x;
    means
        .iter()
        .filter(|&&(rber, mean)| rber > 0.0 && mean >= threshold)
        .map(|&(rber, _)| rber)
        .reduce(f64::max)
}

pub fn robustness(result: &SweepResult, x: f64) -> Option<f64> {
    let means: Vec<(f64, f64)> = result.points.iter().map(|p| (p.rber, p.mean_accuracy)).collect();
    robustness_from_means(result.baseline_accuracy, &means, x)
}

/// Corrupts, decodes and evaluates `bundle` for every (grid point, trial).
///
/// Trial `t` uses the same seed at every grid point, so neighboring rates see
/// nested flip patterns. Work runs in parallel; results are ordered by
/// (grid point, trial) regardless of completion order.
pub fn run_sweep(bundle: &ModelBundle, data: &LabeledDataset, config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for name in &config.tensor_filter {
        if bundle.tensor(name).is_none() {
            return Err(Error::UnknownTensor(name.clone()));
        }
    }
    let opts = DecodeOptions { sanitize: config.sanitize };
    let clean = Network::from_bundle(bundle, opts)?;
    let baseline_correct = count_correct(&clean, data, config.top_k)?;
    let baseline_accuracy = baseline_correct as f64 / data.len() as f64;

    let trials = u64::from(config.trials);
    let jobs: Vec<(usize, u64)> = (0..config.rber_grid.len())
        .flat_map(|g| (0..trials).map(move |t| (g, t)))
        .collect();

    let samples: Vec<TrialSample> = jobs
        .par_iter()
        .map(|&(g, trial)| {
            let rber = config.rber_grid[g];
            let run = || -> Result<TrialSample> {
                let channel = BscChannel::new(rber, config.master_seed)?;
                let target = InjectionTarget { tensor_filter: config.tensor_filter.clone(), trial_index: trial };
                let (corrupted, flips) = corrupt_bundle(bundle, &channel, &target)?;
                let net = Network::from_bundle(&corrupted, opts)?;
                let correct = count_correct(&net, data, config.top_k)?;
                Ok(TrialSample {
                    trial,
                    accuracy: correct as f64 / data.len() as f64,
                    correct,
                    flips,
                    nulled: net.nulled_weights(),
                })
            };
            run().map_err(|e| Error::Trial { rber, trial, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(config.rber_grid.len());
    for (g, chunk) in samples.chunks(config.trials as usize).enumerate() {
        let accuracies: Vec<f64> = chunk.iter().map(|s| s.accuracy).collect();
        let mut stats = box_stats(&accuracies)?;
        let pooled: usize = chunk.iter().map(|s| s.correct).sum();
        let mean_accuracy = pooled as f64 / (chunk.len() * data.len()) as f64;
        stats.mean = mean_accuracy;
        points.push(SweepPoint { rber: config.rber_grid[g], samples: chunk.to_vec(), mean_accuracy, stats });
    }

    let mut result = SweepResult {
        config: config.clone(),
        baseline_accuracy,
        robustness: None,
        points,
        dataset_size: data.len(),
        stored_bits: bundle.stored_bits(),
        codecs: bundle.tensors().iter().map(|t| (t.name().to_owned(), *t.spec())).collect(),
        seed_derivation: SEED_DERIVATION.to_owned(),
    };
    result.robustness = robustness(&result, config.x);
    Ok(result)
}

/// How the parity variant of a bundle spends its bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityBudget {
    /// Same total bits per weight: one data bit becomes the check bit.
    #[default]
    EqualStorage,
    /// Same data bits per weight plus one extra check bit.
    EqualPrecision,
}

/// Re-encodes every index-codec tensor of a parity-free bundle with a check bit.
/// binary16 tensors are left as they are.
pub fn parity_variant(bundle: &ModelBundle, budget: ParityBudget) -> Result<ModelBundle> {
    let mut out = bundle.requantize(|t| {
        let s = t.spec();
        if !s.kind().is_index_codec() || s.parity() {
            return Ok(*s);
        }
        let q = match budget {
            ParityBudget::EqualStorage => s.q(),
            ParityBudget::EqualPrecision => s.q() + 1,
        };
        CodecSpec::new(s.kind(), q, true)
    })?;
    out.metadata_mut().insert("parity_variant".into(), format!("{budget:?}"));
    Ok(out)
}

/// Removes check bits, keeping the stored width: the data word grows by one bit.
pub fn plain_variant(bundle: &ModelBundle) -> Result<ModelBundle> {
    bundle.requantize(|t| {
        let s = t.spec();
        if s.parity() {
            CodecSpec::new(s.kind(), s.q(), false)
        } else {
            Ok(*s)
        }
    })
}
