//! Top-level fit loops.
//!
//! Each candidate model size (or (topology, size) pair in the tree
//! variant) owns a persistent tempered ensemble targeting the training
//! posterior. The live chain targets the full-data posterior of the
//! current model; every sweep a uniformly proposed candidate offers its
//! cold training-chain state, accepted on the test-data likelihood ratio
//! times the model prior ratio. Retained draws come from the live chain
//! only.

use super::flat::{FlatKernel, FlatState};
use super::tempering::{Kernel, PtEnsemble, SweepStats};
use super::tree_model::{TreeKernel, TreeState};
use super::{choose_b, split_counts, stream_rng, ModelVariant, RefreshSchedule, SamplerConfig};
use crate::estimate::{Draw, PosteriorSamples};
use crate::genotype::CodeOrdering;
use crate::likelihood::ReadCounts;
use crate::priors::{log_prior_c, log_prior_rho, log_prior_w, log_prior_w_purity, Hyperparams};
use crate::tree::{log_prior_z_given_tree, TreeHyper, TreeSpace};
use crate::{CoreError, Result};
use rand::Rng;
use std::sync::Arc;

/// One thinned telemetry record of the live chain.
#[derive(Clone, Debug)]
pub struct TelemetryRow {
    pub iter: usize,
    pub c: usize,
    pub log_lik: f64,
    pub log_post: f64,
    /// Cold-chain log posteriors of the candidate ensembles (omitted for
    /// large candidate spaces).
    pub candidate_log_post: Vec<f64>,
}

/// Acceptance-rate summary and live-chain traces of a fit.
#[derive(Clone, Debug, Default)]
pub struct Telemetry {
    pub rows: Vec<TelemetryRow>,
    pub theta_accept: f64,
    pub rho_accept: f64,
    pub swap_accept: f64,
    pub transdim_accept: f64,
}

/// Posterior draws plus run telemetry.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub samples: PosteriorSamples,
    pub telemetry: Telemetry,
    pub b: f64,
    pub variant: ModelVariant,
}

/// Log acceptance ratio of a trans-dimensional proposal: the test-data
/// likelihood ratio times the model prior ratio. The training-posterior
/// proposal density and the uniform candidate proposal cancel.
pub fn transdim_log_acceptance(
    test_ll_prop: f64,
    test_ll_cur: f64,
    log_prior_prop: f64,
    log_prior_cur: f64,
) -> f64 {
    test_ll_prop - test_ll_cur + log_prior_prop - log_prior_cur
}

/// Run the flat (or purity) sampler over the configured size range.
pub fn fit_flat(
    counts: &ReadCounts,
    hyper: &Hyperparams,
    cfg: &SamplerConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let purity = match cfg.variant {
        ModelVariant::Flat => false,
        ModelVariant::FlatPurity => true,
        ModelVariant::Tree => {
            return Err(CoreError::Config("fit_flat cannot run the tree variant".into()))
        }
    };
    let b = match cfg.train_frac {
        Some(b) => b,
        None => choose_b(counts, cfg.test_target)?,
    };
    let split = split_counts(counts, b)?;
    let train = Arc::new(split.train);
    let test = split.test;
    let full = Arc::new(counts.clone());

    let n_cand = cfg.c_max - cfg.c_min + 1;
    let rungs = cfg.ladder.len() as u64;
    let mut sched = stream_rng(cfg.seed, 0);
    let mut live_rng = stream_rng(cfg.seed, 1);

    let mut ensembles = Vec::with_capacity(n_cand);
    let mut live_kernels = Vec::with_capacity(n_cand);
    for (i, c) in (cfg.c_min..=cfg.c_max).enumerate() {
        let kern = FlatKernel::new(
            train.clone(),
            hyper.clone(),
            c,
            purity,
            cfg.step_theta,
            cfg.step_rho,
        );
        let base = 16 + i as u64 * (rungs + 1);
        ensembles.push(PtEnsemble::new(kern, &cfg.ladder, cfg.u0, cfg.seed, base)?);
        live_kernels.push(FlatKernel::new(
            full.clone(),
            hyper.clone(),
            c,
            purity,
            cfg.step_theta,
            cfg.step_rho,
        ));
    }

    let mut cur = sched.gen_range(0..n_cand);
    let mut live_state: FlatState = live_kernels[cur].init_state(&mut live_rng)?;
    let mut live_stats = SweepStats::default();
    let mut rr = 0usize;
    let mut transdim_prop = 0u64;
    let mut transdim_acc = 0u64;
    let mut draws = Vec::new();
    let mut rows = Vec::new();

    for iter in 0..cfg.iters {
        let prop = sched.gen_range(0..n_cand);
        match cfg.refresh {
            RefreshSchedule::All => {
                for ens in &mut ensembles {
                    ens.pt_sweep();
                }
            }
            RefreshSchedule::Proposed { extra } => {
                ensembles[prop].pt_sweep();
                for _ in 0..extra {
                    ensembles[rr % n_cand].pt_sweep();
                    rr += 1;
                }
            }
        }
        live_kernels[cur].sweep(&mut live_state, 1.0, &mut live_rng, &mut live_stats);

        let live_test_ll = live_kernels[cur].log_lik_counts(&test, &live_state);
        let cand_state = ensembles[prop].cold_state();
        let prop_test_ll = live_kernels[prop].log_lik_counts(&test, cand_state);
        let lp_prop = log_prior_c(cfg.c_min + prop, hyper.r, hyper.geom_support);
        let lp_cur = log_prior_c(cfg.c_min + cur, hyper.r, hyper.geom_support);
        let log_acc = transdim_log_acceptance(prop_test_ll, live_test_ll, lp_prop, lp_cur);
        transdim_prop += 1;
        if log_acc >= 0.0 || sched.gen::<f64>().ln() < log_acc {
            transdim_acc += 1;
            cur = prop;
            live_state = cand_state.clone();
        }

        if iter >= cfg.burnin && (iter - cfg.burnin) % cfg.thin == 0 {
            let kern = &live_kernels[cur];
            let w = live_state.weights();
            let log_lik = kern.log_lik_counts(&full, &live_state);
            let mut log_prior_x = log_prior_rho(&live_state.noise(), hyper.d1);
            for (t, row) in w.w.iter().enumerate() {
                log_prior_x += match &w.w_star {
                    Some(ws) => log_prior_w_purity(
                        ws[t],
                        row,
                        hyper.d1_star,
                        hyper.d2_star,
                        hyper.d0,
                        hyper.d,
                    ),
                    None => log_prior_w(row, hyper.d0, hyper.d),
                };
            }
            draws.push(Draw {
                c: cfg.c_min + cur,
                z: live_state.z.clone(),
                w: w.w,
                w_star: w.w_star,
                rho: live_state.rho,
                tree: None,
                log_lik,
                log_prior_x,
            });
            let candidate_log_post = if n_cand <= 16 {
                ensembles.iter().map(|e| e.cold_log_posterior()).collect()
            } else {
                Vec::new()
            };
            rows.push(TelemetryRow {
                iter,
                c: cfg.c_min + cur,
                log_lik,
                log_post: kern.log_posterior(&live_state),
                candidate_log_post,
            });
        }
    }

    let mut pooled = live_stats.clone();
    for ens in &ensembles {
        pooled.merge(&ens.stats());
    }
    let telemetry = Telemetry {
        rows,
        theta_accept: pooled.theta_rate(),
        rho_accept: pooled.rho_rate(),
        swap_accept: pooled.swap_rate(),
        transdim_accept: transdim_acc as f64 / transdim_prop.max(1) as f64,
    };
    Ok(FitResult {
        samples: PosteriorSamples { draws, ordering: CodeOrdering::Flat },
        telemetry,
        b,
        variant: cfg.variant,
    })
}

/// Run the tree sampler over the enumerated (topology, size) space.
pub fn fit_tree(counts: &ReadCounts, hyper: &TreeHyper, cfg: &SamplerConfig) -> Result<FitResult> {
    cfg.validate()?;
    if cfg.variant != ModelVariant::Tree {
        return Err(CoreError::Config("fit_tree requires the tree variant".into()));
    }
    let b = match cfg.train_frac {
        Some(b) => b,
        None => choose_b(counts, cfg.test_target)?,
    };
    let split = split_counts(counts, b)?;
    let train = Arc::new(split.train);
    let test = split.test;
    let full = Arc::new(counts.clone());

    let space = TreeSpace::build(cfg.c_min, cfg.c_max, hyper.beta, hyper.alpha, hyper.geom_support)?;
    let n_cand = space.len();
    let rungs = cfg.ladder.len() as u64;
    let mut sched = stream_rng(cfg.seed, 0);
    let mut live_rng = stream_rng(cfg.seed, 1);

    let mut ensembles = Vec::with_capacity(n_cand);
    let mut live_kernels = Vec::with_capacity(n_cand);
    for i in 0..n_cand {
        let topo = space.topology(i).clone();
        let kern = TreeKernel::new(
            train.clone(),
            hyper.clone(),
            topo.clone(),
            cfg.step_theta,
            cfg.step_rho,
        );
        let base = 16 + i as u64 * (rungs + 1);
        ensembles.push(PtEnsemble::new(kern, &cfg.ladder, cfg.u0, cfg.seed, base)?);
        live_kernels.push(TreeKernel::new(
            full.clone(),
            hyper.clone(),
            topo,
            cfg.step_theta,
            cfg.step_rho,
        ));
    }

    let mut cur = sched.gen_range(0..n_cand);
    let mut live_state: TreeState = live_kernels[cur].init_state(&mut live_rng)?;
    let mut live_stats = SweepStats::default();
    let mut rr = 0usize;
    let mut transdim_prop = 0u64;
    let mut transdim_acc = 0u64;
    let mut draws = Vec::new();
    let mut rows = Vec::new();

    for iter in 0..cfg.iters {
        let prop = sched.gen_range(0..n_cand);
        match cfg.refresh {
            RefreshSchedule::All => {
                for ens in &mut ensembles {
                    ens.pt_sweep();
                }
            }
            RefreshSchedule::Proposed { extra } => {
                ensembles[prop].pt_sweep();
                for _ in 0..extra {
                    ensembles[rr % n_cand].pt_sweep();
                    rr += 1;
                }
            }
        }
        live_kernels[cur].sweep(&mut live_state, 1.0, &mut live_rng, &mut live_stats);

        let live_test_ll = live_kernels[cur].log_lik_counts(&test, &live_state);
        let cand_state = ensembles[prop].cold_state();
        let prop_test_ll = live_kernels[prop].log_lik_counts(&test, cand_state);
        let log_acc = transdim_log_acceptance(
            prop_test_ll,
            live_test_ll,
            space.log_prior(prop),
            space.log_prior(cur),
        );
        transdim_prop += 1;
        if log_acc >= 0.0 || sched.gen::<f64>().ln() < log_acc {
            transdim_acc += 1;
            cur = prop;
            live_state = cand_state.clone();
        }

        if iter >= cfg.burnin && (iter - cfg.burnin) % cfg.thin == 0 {
            let kern = &live_kernels[cur];
            let topo = space.topology(cur);
            let w = live_state.weights();
            let log_lik = kern.log_lik_counts(&full, &live_state);
            let mut log_prior_x =
                log_prior_z_given_tree(&live_state.z, topo, kern.lambda)
                    + log_prior_rho(&live_state.noise(), hyper.d1);
            for row in w.w.iter() {
                // normal-clone weight is Beta, the rest scaled Dirichlet
                let w1 = row[1];
                let mut rest = vec![row[0]];
                rest.extend_from_slice(&row[2..]);
                log_prior_x +=
                    log_prior_w_purity(w1, &rest, kern.a_p, kern.b_p, hyper.d0, hyper.d);
            }
            draws.push(Draw {
                c: topo.n_nodes(),
                z: live_state.z.clone(),
                w: w.w,
                w_star: None,
                rho: live_state.rho,
                tree: Some(topo.clone()),
                log_lik,
                log_prior_x,
            });
            let candidate_log_post = if n_cand <= 16 {
                ensembles.iter().map(|e| e.cold_log_posterior()).collect()
            } else {
                Vec::new()
            };
            rows.push(TelemetryRow {
                iter,
                c: topo.n_nodes(),
                log_lik,
                log_post: kern.log_posterior(&live_state),
                candidate_log_post,
            });
        }
    }

    let mut pooled = live_stats.clone();
    for ens in &ensembles {
        pooled.merge(&ens.stats());
    }
    let telemetry = Telemetry {
        rows,
        theta_accept: pooled.theta_rate(),
        rho_accept: pooled.rho_rate(),
        swap_accept: pooled.swap_rate(),
        transdim_accept: transdim_acc as f64 / transdim_prop.max(1) as f64,
    };
    Ok(FitResult {
        samples: PosteriorSamples { draws, ordering: CodeOrdering::Tree },
        telemetry,
        b,
        variant: ModelVariant::Tree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::GeomSupport;

    #[test]
    fn transdim_acceptance_trivia() {
        // equal test likelihoods and a flat model prior accept surely
        assert_eq!(transdim_log_acceptance(-10.0, -10.0, -1.0, -1.0), 0.0);
        // geometric prior ratio: moving from C to C+1 multiplies by 1 - r
        let r = 0.4;
        let lp2 = log_prior_c(2, r, GeomSupport::ExponentC);
        let lp3 = log_prior_c(3, r, GeomSupport::ExponentC);
        let acc = transdim_log_acceptance(-5.0, -5.0, lp3, lp2);
        assert!((acc.exp() - 0.6).abs() < 1e-12);
        // the acceptance depends on the data only through the test-set
        // likelihoods passed in, never the training half
        let a = transdim_log_acceptance(-3.0, -4.0, lp2, lp2);
        let b = transdim_log_acceptance(-3.0, -4.0, lp2, lp2);
        assert_eq!(a, b);
    }

    #[test]
    fn transdim_acceptance_ignores_training_half() {
        // the acceptance is a function of the test half and the model
        // prior only: recomputing it after zeroing the training half
        // gives bitwise-equal values
        use crate::mcmc::{split_counts, FlatKernel, Kernel};
        use crate::simulate::{generate, SimSpec};
        use rand::SeedableRng;
        use std::sync::Arc;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(82);
        let (counts, _) = generate(&SimSpec::sim1(), &mut rng).unwrap();
        let split = split_counts(&counts, 0.95).unwrap();
        let hyper = Hyperparams::default();
        let k2 = FlatKernel::new(Arc::new(split.train.clone()), hyper.clone(), 2, false, 0.2, 0.1);
        let k3 = FlatKernel::new(Arc::new(split.train.clone()), hyper.clone(), 3, false, 0.2, 0.1);
        let st2 = k2.init_state(&mut rng).unwrap();
        let st3 = k3.init_state(&mut rng).unwrap();
        let lp2 = log_prior_c(2, hyper.r, hyper.geom_support);
        let lp3 = log_prior_c(3, hyper.r, hyper.geom_support);
        let acc = transdim_log_acceptance(
            k3.log_lik_counts(&split.test, &st3),
            k2.log_lik_counts(&split.test, &st2),
            lp3,
            lp2,
        );
        // rebuild the kernels over a zeroed training half; states and the
        // test half unchanged
        let zeroed = Arc::new(crate::likelihood::ReadCounts::zeros(
            counts.n_samples(),
            counts.n_pairs(),
        ));
        let k2z = FlatKernel::new(zeroed.clone(), hyper.clone(), 2, false, 0.2, 0.1);
        let k3z = FlatKernel::new(zeroed, hyper.clone(), 3, false, 0.2, 0.1);
        let acc_zeroed = transdim_log_acceptance(
            k3z.log_lik_counts(&split.test, &st3),
            k2z.log_lik_counts(&split.test, &st2),
            lp3,
            lp2,
        );
        assert_eq!(acc, acc_zeroed);
    }

    #[test]
    fn tiny_flat_fit_is_deterministic() {
        use crate::simulate::{generate, SimSpec};
        use rand::SeedableRng;
        let mut spec = SimSpec::sim1();
        spec.k = 8;
        spec.z = crate::simulate::ZSpec::Blocks(vec![
            crate::simulate::Block::new(3, 6, 1, 4),
            crate::simulate::Block::new(5, 8, 2, 6),
        ]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(80);
        let (counts, _) = generate(&spec, &mut rng).unwrap();
        let cfg = SamplerConfig {
            iters: 120,
            burnin: 40,
            thin: 4,
            seed: 7,
            c_min: 1,
            c_max: 3,
            ladder: crate::mcmc::TemperatureLadder::new(vec![2.0, 1.0]).unwrap(),
            ..SamplerConfig::default()
        };
        let hyper = Hyperparams::default();
        let r1 = fit_flat(&counts, &hyper, &cfg).unwrap();
        let r2 = fit_flat(&counts, &hyper, &cfg).unwrap();
        assert_eq!(r1.samples.draws.len(), 20);
        for (a, b) in r1.samples.draws.iter().zip(&r2.samples.draws) {
            assert_eq!(a.c, b.c);
            assert_eq!(a.z, b.z);
            assert_eq!(a.w, b.w);
            assert_eq!(a.log_lik, b.log_lik);
        }
        let mut cfg2 = cfg.clone();
        cfg2.seed = 8;
        let r3 = fit_flat(&counts, &hyper, &cfg2).unwrap();
        let same = r1
            .samples
            .draws
            .iter()
            .zip(&r3.samples.draws)
            .all(|(a, b)| a.log_lik == b.log_lik);
        assert!(!same, "different seeds produced identical streams");
    }

    #[test]
    fn tiny_tree_fit_runs() {
        use crate::simulate::{generate, SimSpec};
        use rand::SeedableRng;
        let spec = SimSpec::tree2(6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(81);
        let (counts, _) = generate(&spec, &mut rng).unwrap();
        let cfg = SamplerConfig {
            iters: 60,
            burnin: 20,
            thin: 2,
            seed: 9,
            c_min: 2,
            c_max: 3,
            variant: ModelVariant::Tree,
            ladder: crate::mcmc::TemperatureLadder::single(),
            refresh: RefreshSchedule::Proposed { extra: 1 },
            train_frac: Some(0.9),
            ..SamplerConfig::default()
        };
        let res = fit_tree(&counts, &TreeHyper::default(), &cfg).unwrap();
        assert_eq!(res.samples.draws.len(), 20);
        for d in &res.samples.draws {
            let topo = d.tree.as_ref().unwrap();
            assert_eq!(topo.n_nodes(), d.c);
            assert!(d.log_prior_x.is_finite());
            assert!(d.log_lik.is_finite());
        }
    }
}
