//! Sampler-correctness and convergence tooling: the joint-distribution
//! test driven by a successive-conditional simulator, split-chain
//! convergence z-scores, spectral density at frequency zero, and trace /
//! autocorrelation export.

use crate::genotype::{ReadOutcome, NUM_OUTCOMES};
use crate::likelihood::ReadCounts;
use crate::mcmc::{stream_rng, FlatKernel, Kernel, SweepStats};
use crate::priors::Hyperparams;
use crate::stats::{mean, normal_two_sided_p, variance};
use crate::{CoreError, Result};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// A named scalar chain trace.
#[derive(Clone, Debug)]
pub struct ScalarTrace {
    pub name: String,
    pub values: Vec<f64>,
}

/// Spectral density at frequency zero by a Bartlett lag window with
/// bandwidth floor(sqrt(L)); always nonnegative, and zero for a constant
/// trace.
pub fn spectral_density_zero(values: &[f64]) -> f64 {
    let m = (values.len() as f64).sqrt().floor() as usize;
    spectral_density_zero_with_bandwidth(values, m)
}

/// The lag-window estimate at an explicit bandwidth, for stability
/// checks.
pub fn spectral_density_zero_with_bandwidth(values: &[f64], m: usize) -> f64 {
    let l = values.len();
    assert!(l >= 2, "trace too short for a spectral estimate");
    let mu = mean(values);
    let cov = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..l - lag {
            acc += (values[i] - mu) * (values[i + lag] - mu);
        }
        acc / l as f64
    };
    let mut s = cov(0);
    for lag in 1..=m.min(l - 1) {
        let w = 1.0 - lag as f64 / (m as f64 + 1.0);
        s += 2.0 * w * cov(lag);
    }
    s.max(0.0)
}

/// Autocorrelation function up to `max_lag` (1 at lag zero).
pub fn autocorrelation(values: &[f64], max_lag: usize) -> Vec<f64> {
    let l = values.len();
    let mu = mean(values);
    let var: f64 = values.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / l as f64;
    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag.min(l - 1) {
        if var <= 0.0 {
            out.push(if lag == 0 { 1.0 } else { 0.0 });
            continue;
        }
        let mut acc = 0.0;
        for i in 0..l - lag {
            acc += (values[i] - mu) * (values[i + lag] - mu);
        }
        out.push(acc / l as f64 / var);
    }
    out
}

/// Split-chain convergence z-score: compare the mean of the first
/// `frac_a` of the trace with the mean of the last `frac_b`, scaled by
/// their spectral densities.
pub fn geweke_convergence(trace: &[f64], frac_a: f64, frac_b: f64) -> Result<(f64, f64)> {
    if frac_a <= 0.0 || frac_b <= 0.0 || frac_a + frac_b >= 1.0 {
        return Err(CoreError::Config(format!(
            "window fractions {frac_a} + {frac_b} must stay below 1"
        )));
    }
    let l = trace.len();
    let la = (l as f64 * frac_a).floor() as usize;
    let lb = (l as f64 * frac_b).floor() as usize;
    if la < 10 || lb < 10 {
        return Err(CoreError::Config("trace too short for the window sizes".into()));
    }
    let a = &trace[..la];
    let b = &trace[l - lb..];
    let var = spectral_density_zero(a) / la as f64 + spectral_density_zero(b) / lb as f64;
    if var <= 0.0 {
        return Err(CoreError::Config("degenerate trace: zero spectral variance".into()));
    }
    let z = (mean(a) - mean(b)) / var.sqrt();
    Ok((z, normal_two_sided_p(z)))
}

/// Write `<name>_trace.csv` and `<name>_acf.csv` (lags to 50) per trace.
pub fn export_traces(dir: &Path, traces: &[ScalarTrace]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for trace in traces {
        let mut f = std::fs::File::create(dir.join(format!("{}_trace.csv", trace.name)))?;
        writeln!(f, "index,value")?;
        for (i, v) in trace.values.iter().enumerate() {
            writeln!(f, "{i},{v}")?;
        }
        let acf = autocorrelation(&trace.values, 50);
        let mut f = std::fs::File::create(dir.join(format!("{}_acf.csv", trace.name)))?;
        writeln!(f, "lag,acf")?;
        for (lag, v) in acf.iter().enumerate() {
            writeln!(f, "{lag},{v}")?;
        }
    }
    Ok(())
}

/// Statistics tracked by the joint test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GewekeStatistic {
    /// Subclone weight w[t][c], c >= 1.
    Weight { t: usize, c: usize },
    /// Outcome probability p[t][k][g] including the missingness factor.
    ReadProb { t: usize, k: usize, g: usize },
}

impl GewekeStatistic {
    pub fn name(&self) -> String {
        match self {
            GewekeStatistic::Weight { t, c } => format!("w_{}_{}", t + 1, c),
            GewekeStatistic::ReadProb { t, k, g } => {
                format!("p_{}_{}_{}", t + 1, k + 1, g + 1)
            }
        }
    }
}

/// Kernel deviations used to demonstrate the test's sensitivity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KernelMutation {
    #[default]
    None,
    /// Drop the log-scale proposal Jacobian in the abundance updates.
    SkipThetaJacobian,
}

/// Configuration of the joint-distribution correctness test: a fixed-size
/// flat model whose data are regenerated from the current state each
/// cycle.
#[derive(Clone, Debug)]
pub struct GewekeConfig {
    pub t: usize,
    pub k: usize,
    pub c: usize,
    /// Multinomial size per (sample, pair).
    pub depth: u64,
    /// Missingness-class probabilities.
    pub v: [f64; 3],
    pub cycles: usize,
    pub hyper: Hyperparams,
    pub n_weight_stats: usize,
    pub n_prob_stats: usize,
    /// Independent prior draws behind the reference means.
    pub prior_draws: usize,
    pub seed: u64,
    pub mutation: KernelMutation,
}

impl Default for GewekeConfig {
    fn default() -> Self {
        Self {
            t: 4,
            k: 80,
            c: 3,
            depth: 50,
            v: [0.4, 0.3, 0.3],
            cycles: 200_000,
            hyper: Hyperparams::default(),
            n_weight_stats: 3,
            n_prob_stats: 3,
            prior_draws: 200_000,
            seed: 4242,
            mutation: KernelMutation::None,
        }
    }
}

/// Result for one statistic.
#[derive(Clone, Debug)]
pub struct GewekeStat {
    pub name: String,
    pub z: f64,
    pub p: f64,
    pub chain_mean: f64,
    pub prior_mean: f64,
    /// Set when the trace was constant and the test meaningless.
    pub skipped: bool,
}

#[derive(Clone, Debug)]
pub struct GewekeReport {
    pub stats: Vec<GewekeStat>,
    pub cycles: usize,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.stats
            .iter()
            .filter(|s| !s.skipped)
            .map(|s| s.z.abs())
            .fold(0.0, f64::max)
    }

    pub fn min_p(&self) -> f64 {
        self.stats.iter().filter(|s| !s.skipped).map(|s| s.p).fold(1.0, f64::min)
    }
}

fn statistic_value(stat: &GewekeStatistic, kernel: &FlatKernel, state: &crate::mcmc::FlatState, v: &[f64; 3]) -> f64 {
    match *stat {
        GewekeStatistic::Weight { t, c } => state.weights().w[t][c],
        GewekeStatistic::ReadProb { t, k, g } => {
            let p = kernel.read_probs(state, t, k);
            v[ReadOutcome::from_index(g).class().index()] * p[g]
        }
    }
}

fn regenerate_counts(
    kernel: &FlatKernel,
    state: &crate::mcmc::FlatState,
    cfg: &GewekeConfig,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> ReadCounts {
    let mut counts = ReadCounts::zeros(cfg.t, cfg.k);
    for t in 0..cfg.t {
        for k in 0..cfg.k {
            let cond = kernel.read_probs(state, t, k);
            let mut p = [0.0f64; NUM_OUTCOMES];
            for g in 0..NUM_OUTCOMES {
                p[g] = cond[g] * cfg.v[ReadOutcome::from_index(g).class().index()];
            }
            // chained binomials
            let mut rest = cfg.depth;
            let mut p_rest: f64 = p.iter().sum();
            let mut row = [0.0f64; NUM_OUTCOMES];
            for g in 0..NUM_OUTCOMES {
                if rest == 0 {
                    break;
                }
                if g + 1 == NUM_OUTCOMES {
                    row[g] = rest as f64;
                    break;
                }
                if p[g] <= 0.0 {
                    continue;
                }
                let frac = (p[g] / p_rest).min(1.0);
                let draw = if frac >= 1.0 {
                    rest
                } else {
                    Binomial::new(rest, frac).expect("binomial").sample(rng)
                };
                row[g] = draw as f64;
                rest -= draw;
                p_rest -= p[g];
            }
            counts.set_row(t, k, row);
        }
    }
    counts
}

/// Run the joint-distribution test: alternate data regeneration with one
/// kernel sweep, and compare the long-run statistic means against
/// independent prior-predictive means. Under a correct sampler each
/// z-score is asymptotically standard normal.
pub fn geweke_joint(cfg: &GewekeConfig) -> Result<GewekeReport> {
    let mut pick_rng = stream_rng(cfg.seed, 100);
    let mut stats_list: Vec<GewekeStatistic> = Vec::new();
    for _ in 0..cfg.n_weight_stats {
        stats_list.push(GewekeStatistic::Weight {
            t: pick_rng.gen_range(0..cfg.t),
            c: pick_rng.gen_range(1..=cfg.c),
        });
    }
    for _ in 0..cfg.n_prob_stats {
        stats_list.push(GewekeStatistic::ReadProb {
            t: pick_rng.gen_range(0..cfg.t),
            k: pick_rng.gen_range(0..cfg.k),
            g: pick_rng.gen_range(0..NUM_OUTCOMES),
        });
    }
    geweke_joint_with(cfg, &stats_list)
}

/// As [`geweke_joint`] with an explicit statistic list.
pub fn geweke_joint_with(
    cfg: &GewekeConfig,
    stats_list: &[GewekeStatistic],
) -> Result<GewekeReport> {
    let mut kernel = FlatKernel::new(
        Arc::new(ReadCounts::zeros(cfg.t, cfg.k)),
        cfg.hyper.clone(),
        cfg.c,
        false,
        0.2,
        0.1,
    );
    kernel.theta_jacobian = cfg.mutation != KernelMutation::SkipThetaJacobian;

    // prior-predictive reference means from independent draws
    let mut prior_rng = stream_rng(cfg.seed, 101);
    let mut prior_mean = vec![0.0; stats_list.len()];
    let mut prior_m2 = vec![0.0; stats_list.len()];
    for _ in 0..cfg.prior_draws {
        let st = kernel.init_state(&mut prior_rng)?;
        for (i, s) in stats_list.iter().enumerate() {
            let x = statistic_value(s, &kernel, &st, &cfg.v);
            prior_mean[i] += x;
            prior_m2[i] += x * x;
        }
    }
    let m = cfg.prior_draws as f64;
    let mut prior_var = vec![0.0; stats_list.len()];
    for i in 0..stats_list.len() {
        prior_mean[i] /= m;
        prior_var[i] = (prior_m2[i] / m - prior_mean[i] * prior_mean[i]).max(0.0);
    }

    // successive-conditional chain
    let mut rng = stream_rng(cfg.seed, 102);
    let mut state = kernel.init_state(&mut rng)?;
    let mut sweep_stats = SweepStats::default();
    let mut traces: Vec<Vec<f64>> =
        vec![Vec::with_capacity(cfg.cycles); stats_list.len()];
    for _ in 0..cfg.cycles {
        let counts = regenerate_counts(&kernel, &state, cfg, &mut rng);
        kernel.counts = Arc::new(counts);
        kernel.sweep(&mut state, 1.0, &mut rng, &mut sweep_stats);
        for (i, s) in stats_list.iter().enumerate() {
            traces[i].push(statistic_value(s, &kernel, &state, &cfg.v));
        }
    }

    let mut out = Vec::with_capacity(stats_list.len());
    for (i, s) in stats_list.iter().enumerate() {
        let trace = &traces[i];
        let chain_mean = mean(trace);
        if variance(trace) < 1e-300 {
            out.push(GewekeStat {
                name: s.name(),
                z: f64::NAN,
                p: f64::NAN,
                chain_mean,
                prior_mean: prior_mean[i],
                skipped: true,
            });
            continue;
        }
        let var = spectral_density_zero(trace) / trace.len() as f64 + prior_var[i] / m;
        let z = (chain_mean - prior_mean[i]) / var.sqrt();
        out.push(GewekeStat {
            name: s.name(),
            z,
            p: normal_two_sided_p(z),
            chain_mean,
            prior_mean: prior_mean[i],
            skipped: false,
        });
    }
    Ok(GewekeReport { stats: out, cycles: cfg.cycles })
}

/// Analytic prior mean of a subclone weight: d / (d0 + C d).
pub fn analytic_weight_prior_mean(hyper: &Hyperparams, c: usize) -> f64 {
    hyper.d / (hyper.d0 + c as f64 * hyper.d)
}
