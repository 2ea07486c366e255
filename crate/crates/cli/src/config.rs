//! Flat key-value configuration file (TOML syntax, one level deep).
//! Every sampler and model hyperparameter has a key; unknown keys are
//! rejected so typos fail loudly. Command-line flags override file values
//! with a warning.

use anyhow::{bail, Context};
use paircall::mcmc::{RefreshSchedule, TemperatureLadder};
use paircall::priors::GeomSupport;
use paircall::{Hyperparams, SamplerConfig, TreeHyper};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    // sampler
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub thin: Option<usize>,
    pub cmin: Option<usize>,
    pub cmax: Option<usize>,
    pub train_frac: Option<f64>,
    pub test_target: Option<f64>,
    pub u0: Option<f64>,
    pub ladder: Option<Vec<f64>>,
    pub step_theta: Option<f64>,
    pub step_rho: Option<f64>,
    pub purity: Option<bool>,
    pub estimate_cap: Option<usize>,
    /// Candidate ensembles advanced per sweep beyond the proposed one;
    /// omit for all-candidates-every-sweep.
    pub refresh_extra: Option<usize>,
    // flat-model hyperparameters
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub d: Option<f64>,
    pub d0: Option<f64>,
    pub d1: Option<f64>,
    pub r: Option<f64>,
    pub d1_star: Option<f64>,
    pub d2_star: Option<f64>,
    /// "exponent-c" or "exponent-c-minus-1".
    pub geom_support: Option<String>,
    // tree-model hyperparameters
    pub tree_alpha: Option<f64>,
    pub tree_beta: Option<f64>,
    pub lambda: Option<f64>,
    pub a_p: Option<f64>,
    pub b_p: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let body = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: FileConfig = toml::from_str(&body)
            .with_context(|| format!("invalid config file {}", path.display()))?;
        Ok(cfg)
    }

    fn geom_support(&self) -> anyhow::Result<Option<GeomSupport>> {
        match self.geom_support.as_deref() {
            None => Ok(None),
            Some("exponent-c") => Ok(Some(GeomSupport::ExponentC)),
            Some("exponent-c-minus-1") => Ok(Some(GeomSupport::ExponentCMinusOne)),
            Some(other) => bail!(
                "geom_support must be 'exponent-c' or 'exponent-c-minus-1', got '{other}'"
            ),
        }
    }

    /// Fold the file values into a sampler configuration.
    pub fn apply_sampler(&self, base: &mut SamplerConfig) -> anyhow::Result<()> {
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.iters {
            base.iters = v;
        }
        if let Some(v) = self.burnin {
            base.burnin = v;
        }
        if let Some(v) = self.thin {
            base.thin = v;
        }
        if let Some(v) = self.cmin {
            base.c_min = v;
        }
        if let Some(v) = self.cmax {
            base.c_max = v;
        }
        if let Some(v) = self.train_frac {
            base.train_frac = Some(v);
        }
        if let Some(v) = self.test_target {
            base.test_target = v;
        }
        if let Some(v) = self.u0 {
            base.u0 = v;
        }
        if let Some(v) = &self.ladder {
            base.ladder = TemperatureLadder::new(v.clone())?;
        }
        if let Some(v) = self.step_theta {
            base.step_theta = v;
        }
        if let Some(v) = self.step_rho {
            base.step_rho = v;
        }
        if let Some(v) = self.estimate_cap {
            base.estimate_cap = v;
        }
        if let Some(extra) = self.refresh_extra {
            base.refresh = RefreshSchedule::Proposed { extra };
        }
        Ok(())
    }

    pub fn apply_flat_hyper(&self, h: &mut Hyperparams) -> anyhow::Result<()> {
        if let Some(v) = self.alpha {
            h.alpha = v;
        }
        if let Some(v) = self.gamma {
            h.gamma = v;
        }
        if let Some(v) = self.d {
            h.d = v;
        }
        if let Some(v) = self.d0 {
            h.d0 = v;
        }
        if let Some(v) = self.d1 {
            h.d1 = v;
        }
        if let Some(v) = self.r {
            h.r = v;
        }
        if let Some(v) = self.d1_star {
            h.d1_star = v;
        }
        if let Some(v) = self.d2_star {
            h.d2_star = v;
        }
        if let Some(s) = self.geom_support()? {
            h.geom_support = s;
        }
        Ok(())
    }

    pub fn apply_tree_hyper(&self, h: &mut TreeHyper) -> anyhow::Result<()> {
        if let Some(v) = self.tree_alpha {
            h.alpha = v;
        }
        if let Some(v) = self.tree_beta {
            h.beta = v;
        }
        if let Some(v) = self.lambda {
            h.lambda = Some(v);
        }
        if let Some(v) = self.a_p {
            h.a_p = Some(v);
        }
        if let Some(v) = self.b_p {
            h.b_p = Some(v);
        }
        if let Some(v) = self.d {
            h.d = v;
        }
        if let Some(v) = self.d0 {
            h.d0 = v;
        }
        if let Some(v) = self.d1 {
            h.d1 = v;
        }
        if let Some(s) = self.geom_support()? {
            h.geom_support = s;
        }
        Ok(())
    }
}

/// Override a config value from a CLI flag, warning when both were given
/// and disagree.
pub fn override_warn<T: PartialEq + std::fmt::Debug + Copy>(
    name: &str,
    from_file: Option<T>,
    from_flag: Option<T>,
    target: &mut T,
) {
    if let Some(v) = from_flag {
        if let Some(f) = from_file {
            if f != v {
                eprintln!("warning: --{name} {v:?} overrides config value {f:?}");
            }
        }
        *target = v;
    }
}
