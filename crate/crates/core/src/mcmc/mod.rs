//! Transition kernels, parallel tempering, the fractional train/test data
//! split, trans-dimensional moves over the model size (and topology), and
//! the top-level fit loops.

mod engine;
mod flat;
mod tempering;
mod tree_model;

pub use engine::{fit_flat, fit_tree, transdim_log_acceptance, FitResult, Telemetry, TelemetryRow};
pub use flat::{FlatKernel, FlatState};
pub use tempering::{swap_log_ratio, Kernel, PtEnsemble, SweepStats};
pub use tree_model::{TreeKernel, TreeState};

use crate::likelihood::ReadCounts;
use crate::{CoreError, Result};
use serde::{Deserialize, Serialize};

/// Positivity guards: states are rejected rather than clamped when a move
/// would push the background weight or a noise entry below these floors,
/// so every outcome probability stays strictly positive.
pub(crate) const W0_FLOOR: f64 = 1e-12;
pub(crate) const RHO_FLOOR: f64 = 1e-12;
pub(crate) const THETA_FLOOR: f64 = 1e-280;
pub(crate) const THETA_CEIL: f64 = 1e280;

/// Which observation model the sampler runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelVariant {
    Flat,
    FlatPurity,
    Tree,
}

impl ModelVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::Flat => "flat",
            ModelVariant::FlatPurity => "flat+purity",
            ModelVariant::Tree => "tree",
        }
    }
}

/// Inverse-temperature ladder; the last rung is always the untempered
/// target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureLadder(Vec<f64>);

impl TemperatureLadder {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.is_empty() {
            return Err(CoreError::Config("empty temperature ladder".into()));
        }
        if (deltas.last().unwrap() - 1.0).abs() > 1e-12 {
            return Err(CoreError::Config("ladder must end at temperature 1".into()));
        }
        for w in deltas.windows(2) {
            if w[1] > w[0] {
                return Err(CoreError::Config("ladder temperatures must be nonincreasing".into()));
            }
        }
        if deltas.iter().any(|&d| d <= 0.0) {
            return Err(CoreError::Config("ladder temperatures must be positive".into()));
        }
        Ok(Self(deltas))
    }

    /// The ten-rung ladder used throughout the reference runs.
    pub fn default_ten() -> Self {
        Self(vec![4.5, 3.2, 2.5, 2.0, 1.7, 1.5, 1.35, 1.2, 1.1, 1.0])
    }

    /// A single untempered chain.
    pub fn single() -> Self {
        Self(vec![1.0])
    }

    pub fn deltas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for TemperatureLadder {
    fn default() -> Self {
        Self::default_ten()
    }
}

/// How often candidate training ensembles advance relative to the live
/// chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefreshSchedule {
    /// Every candidate ensemble advances every sweep.
    All,
    /// The proposed candidate advances, plus `extra` others round-robin.
    Proposed { extra: usize },
}

/// Sampler configuration. `train_frac` overrides the automatic choice of
/// the split fraction from `test_target`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// Ladder of the per-candidate training ensembles.
    pub ladder: TemperatureLadder,
    /// Probability of a parallel (all-chain) step; the complement attempts
    /// one adjacent swap.
    pub u0: f64,
    pub c_min: usize,
    pub c_max: usize,
    pub train_frac: Option<f64>,
    /// Desired test-set read mass (split across samples).
    pub test_target: f64,
    pub step_theta: f64,
    pub step_rho: f64,
    pub variant: ModelVariant,
    pub refresh: RefreshSchedule,
    /// Cap on the samples entering the pairwise-distance point estimate.
    pub estimate_cap: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iters: 30_000,
            burnin: 10_000,
            thin: 10,
            seed: 1234,
            ladder: TemperatureLadder::default_ten(),
            u0: 0.9,
            c_min: 1,
            c_max: 10,
            train_frac: None,
            test_target: 160.0,
            step_theta: 0.2,
            step_rho: 0.1,
            variant: ModelVariant::Flat,
            refresh: RefreshSchedule::All,
            estimate_cap: 2000,
        }
    }
}

impl SamplerConfig {
    /// Defaults for the tree variant: smaller size range and a thinner
    /// candidate schedule over the much larger topology space.
    pub fn default_tree() -> Self {
        Self {
            iters: 8_000,
            burnin: 3_000,
            thin: 1,
            c_min: 2,
            c_max: 5,
            train_frac: Some(0.95),
            variant: ModelVariant::Tree,
            refresh: RefreshSchedule::Proposed { extra: 8 },
            ladder: TemperatureLadder::single(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(CoreError::Config(format!(
                "iters {} must exceed burnin {}",
                self.iters, self.burnin
            )));
        }
        if self.thin == 0 {
            return Err(CoreError::Config("thin must be at least 1".into()));
        }
        if self.c_min < 1 || self.c_min > self.c_max {
            return Err(CoreError::Config(format!(
                "invalid size range {}..={}",
                self.c_min, self.c_max
            )));
        }
        if !(0.0..=1.0).contains(&self.u0) {
            return Err(CoreError::Config("u0 must lie in [0, 1]".into()));
        }
        if self.step_theta <= 0.0 || self.step_rho <= 0.0 {
            return Err(CoreError::Config("step sizes must be positive".into()));
        }
        if let Some(b) = self.train_frac {
            if !(0.0 < b && b < 1.0) {
                return Err(CoreError::Config("train fraction must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// The fractional data split: training counts define the informative
/// proposal, test counts score trans-dimensional moves. The test set is
/// the exact elementwise complement of the training set.
#[derive(Clone, Debug)]
pub struct SplitData {
    pub train: ReadCounts,
    pub test: ReadCounts,
    pub b: f64,
}

/// Split counts into b*n and n - b*n.
pub fn split_counts(counts: &ReadCounts, b: f64) -> Result<SplitData> {
    if !(0.0 < b && b < 1.0) {
        return Err(CoreError::Config(format!("split fraction {b} must lie in (0, 1)")));
    }
    let train = counts.scaled(b);
    let mut test = counts.clone();
    for t in 0..counts.n_samples() {
        for k in 0..counts.n_pairs() {
            for g in 0..8 {
                test.set_n(t, k, g, counts.n(t, k, g) - train.n(t, k, g));
            }
        }
    }
    Ok(SplitData { train, test, b })
}

/// Split fraction that puts a test mass of `target / T` aside.
pub fn choose_b(counts: &ReadCounts, target: f64) -> Result<f64> {
    let total = counts.grand_total();
    let t = counts.n_samples() as f64;
    let test_mass = target / t;
    if test_mass >= total {
        return Err(CoreError::Config(format!(
            "test target {target} exceeds the total read mass {total}"
        )));
    }
    Ok(1.0 - test_mass / total)
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_validation() {
        assert!(TemperatureLadder::new(vec![2.0, 1.0]).is_ok());
        assert!(TemperatureLadder::new(vec![1.0, 2.0]).is_err());
        assert!(TemperatureLadder::new(vec![2.0, 1.5]).is_err());
        assert!(TemperatureLadder::new(vec![]).is_err());
        assert_eq!(TemperatureLadder::default_ten().len(), 10);
        assert_eq!(TemperatureLadder::default_ten().deltas()[0], 4.5);
    }

    #[test]
    fn split_reassembles_exactly() {
        let mut counts = ReadCounts::zeros(1, 2);
        counts.set_row(0, 0, [100.0, 3.0, 7.0, 9.0, 20.0, 1.0, 2.0, 5.0]);
        counts.set_row(0, 1, [55.0, 0.0, 1.0, 0.0, 13.0, 2.0, 8.0, 4.0]);
        let split = split_counts(&counts, 0.95).unwrap();
        assert!((split.train.n(0, 0, 0) - 95.0).abs() < 1e-9);
        assert!((split.test.n(0, 0, 0) - 5.0).abs() < 1e-9);
        for t in 0..1 {
            for k in 0..2 {
                for g in 0..8 {
                    let back = split.train.n(t, k, g) + split.test.n(t, k, g);
                    assert_eq!(back, counts.n(t, k, g));
                }
            }
        }
        assert!(split_counts(&counts, 0.0).is_err());
        assert!(split_counts(&counts, 1.0).is_err());
    }

    #[test]
    fn choose_b_matches_reference_scales() {
        // one sample, total mass 20000: b = 0.992
        let mut counts = ReadCounts::zeros(1, 1);
        counts.set_row(0, 0, [20_000.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = choose_b(&counts, 160.0).unwrap();
        assert!((b - 0.992).abs() < 1e-12);
        let split = split_counts(&counts, b).unwrap();
        assert!((split.test.grand_total() - 160.0).abs() < 1.0);

        // four samples, total mass 200000: b = 0.9998
        let mut counts = ReadCounts::zeros(4, 1);
        for t in 0..4 {
            counts.set_row(t, 0, [50_000.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
        let b = choose_b(&counts, 160.0).unwrap();
        assert!((b - 0.9998).abs() < 1e-12);

        // six samples, 300000 reads: b = 0.999911 to the printed digits
        let mut counts = ReadCounts::zeros(6, 1);
        for t in 0..6 {
            counts.set_row(t, 0, [50_000.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
        let b = choose_b(&counts, 160.0).unwrap();
        assert!((b - 0.999911).abs() < 5e-7);

        let tiny = ReadCounts::zeros(1, 1);
        assert!(choose_b(&tiny, 160.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SamplerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.burnin = cfg.iters;
        assert!(cfg.validate().is_err());
        let mut cfg = SamplerConfig::default();
        cfg.thin = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SamplerConfig::default();
        cfg.c_min = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SamplerConfig::default();
        cfg.train_frac = Some(1.2);
        assert!(cfg.validate().is_err());
    }
}
