//! Chi-square check that the baker's map preserves the uniform distribution.
//!
//! Roots are drawn from a sampler, pushed through the map a number of times,
//! and binned by their leading bits. For uniform roots the image's leading
//! `log2(bins)` bits must again be uniform.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{chi_square_uniform, ChiSquareSummary};
use super::ExperimentError;
use crate::bitstream::BitStream;
use crate::seed;

/// Bits compared when choosing the smaller of two generator roots.
const COMPARE_LIMIT: u64 = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootSampler {
    /// Independent generator roots: uniform on `[0, 1]`.
    #[default]
    Uniform,
    /// The smaller of two uniform roots, with density `2(1 - x)`. A negative control.
    MinOfTwo,
}

impl RootSampler {
    /// Root number `index` under `key`.
    pub fn sample(self, key: u64, index: u64) -> BitStream {
        let draw = seed::derive(key, index);
        let first = BitStream::generator(seed::derive(draw, 0));
        match self {
            Self::Uniform => first,
            Self::MinOfTwo => {
                let second = BitStream::generator(seed::derive(draw, 1));
                let second_smaller = (1..=COMPARE_LIMIT)
                    .find(|&i| first.bit_at(i) != second.bit_at(i))
                    .is_some_and(|i| second.bit_at(i) < first.bit_at(i));
                if second_smaller {
                    second
                } else {
                    first
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceConfig {
    pub samples: u64,
    /// A power of two.
    pub bins: u64,
    pub seed: u64,
    /// Applications of the baker's map before binning.
    #[serde(default = "one")]
    pub shifts: u64,
    #[serde(default)]
    pub sampler: RootSampler,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub config: InvarianceConfig,
    pub counts: Vec<u64>,
    #[serde(flatten)]
    pub chi_square: ChiSquareSummary,
}

pub fn invariance_test(cfg: &InvarianceConfig) -> Result<InvarianceReport, ExperimentError> {
    if cfg.bins < 2 || !cfg.bins.is_power_of_two() {
        return Err(ExperimentError::InvarianceBins(cfg.bins));
    }
    let required = cfg.bins.saturating_mul(100);
    if cfg.samples < required {
        return Err(ExperimentError::TooFewSamples { samples: cfg.samples, required });
    }
    let depth = cfg.bins.trailing_zeros() as u64;
    let bins = cfg.bins as usize;
    let counts = (0..cfg.samples)
        .into_par_iter()
        .fold(
            || vec![0u64; bins],
            |mut counts, j| {
                let mut x = cfg.sampler.sample(cfg.seed, j);
                for _ in 0..cfg.shifts {
                    x = x.baker_shift();
                }
                let bin = (1..=depth).fold(0usize, |acc, i| (acc << 1) | x.bit_at(i) as usize);
                counts[bin] += 1;
                counts
            },
        )
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let chi_square = chi_square_uniform(&counts);
    Ok(InvarianceReport { config: cfg.clone(), counts, chi_square })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(samples: u64, bins: u64, shifts: u64, sampler: RootSampler) -> InvarianceConfig {
        InvarianceConfig { samples, bins, seed: 11, shifts, sampler }
    }

    #[test]
    fn preconditions() {
        assert!(matches!(invariance_test(&cfg(10_000, 12, 1, RootSampler::Uniform)), Err(ExperimentError::InvarianceBins(12))));
        assert!(matches!(
            invariance_test(&cfg(1_000, 16, 1, RootSampler::Uniform)),
            Err(ExperimentError::TooFewSamples { required: 1600, .. })
        ));
    }

    #[test]
    fn uniform_roots_stay_uniform() {
        let r = invariance_test(&cfg(50_000, 16, 1, RootSampler::Uniform)).unwrap();
        assert_eq!(r.counts.iter().sum::<u64>(), 50_000);
        assert!(r.chi_square.p_value > 0.001);
    }

    #[test]
    fn min_of_two_is_rejected() {
        let r = invariance_test(&cfg(50_000, 16, 1, RootSampler::MinOfTwo)).unwrap();
        assert!(r.chi_square.p_value < 1e-6);
    }

    #[test]
    fn min_of_two_is_the_smaller_root() {
        for j in 0..50 {
            let m = RootSampler::MinOfTwo.sample(3, j);
            let draw = seed::derive(3, j);
            let a = BitStream::generator(seed::derive(draw, 0));
            let b = BitStream::generator(seed::derive(draw, 1));
            let smaller = if a.prefix(64) <= b.prefix(64) { a } else { b };
            assert_eq!(m, smaller);
        }
    }

    #[test]
    fn counts_are_deterministic() {
        let a = invariance_test(&cfg(5_000, 8, 2, RootSampler::Uniform)).unwrap();
        let b = invariance_test(&cfg(5_000, 8, 2, RootSampler::Uniform)).unwrap();
        assert_eq!(a, b);
    }
}
