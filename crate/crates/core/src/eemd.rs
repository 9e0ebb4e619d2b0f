//! Ensemble EMD: decompose many noisy copies of a signal and average the
//! IMFs index by index so the added white noise cancels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emd::{emd, EmdError, Imf, ImfSet, SiftConfig};

#[derive(Debug, Error)]
pub enum EemdError {
    #[error("ensemble trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: EmdError,
    },
    #[error(transparent)]
    Emd(#[from] EmdError),
    #[error("no trials to average")]
    EmptyEnsemble,
    #[error("invalid eemd config: {0}")]
    Config(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, EemdError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentPolicy {
    /// Trials lacking IMF k contribute a zero series; every average divides
    /// by the ensemble size.
    #[default]
    PadWithZeros,
    /// Keep only the smallest IMF count; surplus IMFs of longer trials are
    /// folded into that trial's residue.
    TruncateToMin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EemdConfig {
    /// Noise standard deviation as a fraction of the signal's standard deviation.
    pub noise_amplitude: f64,
    pub ensemble_size: usize,
    pub seed: u64,
    pub sift: SiftConfig,
    pub alignment_policy: AlignmentPolicy,
}

impl Default for EemdConfig {
    fn default() -> Self {
        Self {
            noise_amplitude: 0.2,
            ensemble_size: 100,
            seed: 0,
            sift: SiftConfig::default(),
            alignment_policy: AlignmentPolicy::PadWithZeros,
        }
    }
}

impl EemdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_amplitude >= 0.0) || !self.noise_amplitude.is_finite() {
            return Err(EemdError::Config("noise_amplitude must be finite and >= 0".into()));
        }
        if self.ensemble_size < 1 {
            return Err(EemdError::Config("ensemble_size must be at least 1".into()));
        }
        self.sift.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EemdResult {
    pub imf_set: ImfSet,
    pub trial_imf_counts: Vec<usize>,
    pub config: EemdConfig,
}

/// splitmix64 finalizer applied to `seed + trial * golden_gamma`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed.wrapping_add((trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Adds i.i.d. Gaussian noise with standard deviation
/// `amplitude * std(series)`, seeded by `trial_seed`.
pub fn add_white_noise(series: &[f64], amplitude: f64, trial_seed: u64) -> Vec<f64> {
    let sigma = amplitude * population_std(series);
    if !(sigma > 0.0) {
        return series.to_vec();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    series.iter().map(|x| x + normal.sample(&mut rng)).collect()
}

/// Averages per-trial decompositions IMF by IMF. Trials are combined in the
/// order given.
pub fn ensemble_average(trials: &[ImfSet], policy: AlignmentPolicy) -> Result<ImfSet> {
    let first = trials.first().ok_or(EemdError::EmptyEnsemble)?;
    let len = first.source_length;
    let n = trials.len() as f64;
    let counts = trials.iter().map(ImfSet::len);
    let k = match policy {
        AlignmentPolicy::PadWithZeros => counts.max().unwrap_or(0),
        AlignmentPolicy::TruncateToMin => counts.min().unwrap_or(0),
    };
    let mut imf_sums = vec![vec![0.0; len]; k];
    let mut residue_sum = vec![0.0; len];
    for trial in trials {
        for (j, imf) in trial.imfs.iter().enumerate() {
            let target = if j < k { &mut imf_sums[j] } else { &mut residue_sum };
            for (s, v) in target.iter_mut().zip(&imf.values) {
                *s += v;
            }
        }
        for (s, v) in residue_sum.iter_mut().zip(&trial.residue) {
            *s += v;
        }
    }
    let imfs = imf_sums
        .into_iter()
        .enumerate()
        .map(|(j, sum)| {
            let converged = trials
                .iter()
                .filter_map(|t| t.imfs.get(j))
                .all(|imf| imf.converged);
            Imf {
                values: sum.into_iter().map(|s| s / n).collect(),
                index: j + 1,
                sift_iterations: 0,
                converged,
            }
        })
        .collect();
    Ok(ImfSet {
        imfs,
        residue: residue_sum.into_iter().map(|s| s / n).collect(),
        source_length: len,
    })
}

/// Runs the ensemble on the current rayon pool.
pub fn eemd(series: &[f64], config: &EemdConfig) -> Result<EemdResult> {
    config.validate()?;
    if config.noise_amplitude == 0.0 {
        // Every trial would decompose the same signal.
        let set = emd(series, &config.sift).map_err(|source| EemdError::Trial { trial: 0, source })?;
        return Ok(EemdResult {
            trial_imf_counts: vec![set.len(); config.ensemble_size],
            imf_set: set,
            config: *config,
        });
    }
    let trials: Vec<ImfSet> = (0..config.ensemble_size)
        .into_par_iter()
        .map(|trial| {
            let noisy = add_white_noise(series, config.noise_amplitude, trial_seed(config.seed, trial));
            emd(&noisy, &config.sift).map_err(|source| EemdError::Trial { trial, source })
        })
        .collect::<Result<_>>()?;
    let trial_imf_counts = trials.iter().map(ImfSet::len).collect();
    let imf_set = ensemble_average(&trials, config.alignment_policy)?;
    Ok(EemdResult {
        imf_set,
        trial_imf_counts,
        config: *config,
    })
}

/// Runs the ensemble on a dedicated pool of `threads` workers.
pub fn eemd_with_threads(series: &[f64], config: &EemdConfig, threads: usize) -> Result<EemdResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EemdError::ThreadPool(e.to_string()))?;
    pool.install(|| eemd(series, config))
}
