//! Prior densities and samplers for the flat model: geometric model size,
//! Beta-Dirichlet genotype-frequency columns, categorical genotypes given
//! the columns, Dirichlet weights (plain and purity variants), grouped
//! Dirichlet noise, and the gamma device that lets simplex parameters be
//! proposed on the log scale.

use crate::genotype::{GenotypeMatrix, OutcomeClass, NUM_CODES, NUM_OUTCOMES};
use crate::likelihood::NoiseVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Support convention of the geometric prior on the number of subclones.
/// Only ratios enter acceptance probabilities, so the two conventions give
/// identical inference; both are kept because the flat and tree variants
/// print different exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeomSupport {
    /// mass (1-r)^C r on C = 1, 2, ...
    ExponentC,
    /// mass (1-r)^(C-1) r on C = 1, 2, ...
    ExponentCMinusOne,
}

/// Model hyperparameters for the flat variant, defaulting to the reference
/// simulation settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Total Beta mass spread over the columns: pi_c1 ~ Be(1, alpha / C).
    pub alpha: f64,
    /// Symmetric Dirichlet parameter for the non-reference genotype split.
    pub gamma: f64,
    /// Dirichlet weight for each subclone proportion.
    pub d: f64,
    /// Dirichlet weight for the background proportion.
    pub d0: f64,
    /// Noise prior: Dir(d1,..) over complete reads, Dir(2 d1, 2 d1) over
    /// each missing-read group.
    pub d1: f64,
    /// Geometric parameter of the prior on the number of subclones.
    pub r: f64,
    /// Beta parameters of the normal-clone proportion (purity variant).
    pub d1_star: f64,
    pub d2_star: f64,
    pub geom_support: GeomSupport,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            gamma: 2.0,
            d: 0.5,
            d0: 0.03,
            d1: 1.0,
            r: 0.4,
            d1_star: 1.0,
            d2_star: 1.0,
            geom_support: GeomSupport::ExponentC,
        }
    }
}

/// Log mass of the geometric prior on the number of subclones.
pub fn log_prior_c(c: usize, r: f64, support: GeomSupport) -> f64 {
    let c = c as f64;
    match support {
        GeomSupport::ExponentC => c * (1.0 - r).ln() + r.ln(),
        GeomSupport::ExponentCMinusOne => (c - 1.0) * (1.0 - r).ln() + r.ln(),
    }
}

/// Log density of Gamma(shape, 1) at x.
pub fn gamma_logpdf(x: f64, shape: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * x.ln() - x - ln_gamma(shape)
}

/// Log density of Beta(a, b) at x.
pub fn beta_logpdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}

/// Log density of Dirichlet(alpha) at a point on the open simplex.
pub fn dirichlet_logpdf(x: &[f64], alpha: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), alpha.len());
    if x.iter().any(|&v| v <= 0.0 || v >= 1.0) {
        return f64::NEG_INFINITY;
    }
    let mut acc = ln_gamma(alpha.iter().sum());
    for (&xi, &ai) in x.iter().zip(alpha) {
        acc += (ai - 1.0) * xi.ln() - ln_gamma(ai);
    }
    acc
}

pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    Gamma::new(shape, 1.0).expect("gamma shape").sample(rng)
}

pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = sample_gamma(rng, a);
    let y = sample_gamma(rng, b);
    x / (x + y)
}

pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = alpha.iter().map(|&a| sample_gamma(rng, a)).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Beta-Dirichlet distribution over one genotype-frequency column: the
/// reference-genotype probability is Beta(1, b), and the remaining mass is
/// split by a symmetric Dirichlet.
#[derive(Clone, Debug)]
pub struct BetaDirichlet {
    /// Second Beta parameter, alpha / C in the model.
    pub b: f64,
    /// Dirichlet parameters of the non-reference split (length Q - 1).
    pub gamma: Vec<f64>,
}

impl BetaDirichlet {
    pub fn symmetric(alpha: f64, c: usize, gamma: f64, q: usize) -> Self {
        Self { b: alpha / c as f64, gamma: vec![gamma; q - 1] }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let p1 = sample_beta(rng, 1.0, self.b);
        let tail = sample_dirichlet(rng, &self.gamma);
        let mut out = Vec::with_capacity(self.gamma.len() + 1);
        out.push(p1);
        out.extend(tail.iter().map(|&x| x * (1.0 - p1)));
        out
    }

    /// Log density on the open simplex of the full column (dimension Q-1),
    /// including the Jacobian of the scaled-tail construction.
    pub fn logpdf(&self, pi: &[f64]) -> f64 {
        debug_assert_eq!(pi.len(), self.gamma.len() + 1);
        let p1 = pi[0];
        if pi.iter().any(|&v| v <= 0.0 || v >= 1.0) {
            return f64::NEG_INFINITY;
        }
        let rest = 1.0 - p1;
        let tail: Vec<f64> = pi[1..].iter().map(|&x| x / rest).collect();
        let q = pi.len();
        beta_logpdf(p1, 1.0, self.b)
            + dirichlet_logpdf(&tail, &self.gamma)
            - (q as f64 - 2.0) * rest.ln()
    }
}

/// Log prior of a genotype matrix given the columns' genotype frequencies:
/// the sum over entries of the log frequency of the entry's code.
/// `pi` is row-major C x Q over canonical ranks.
pub fn log_prior_z_given_pi(z: &GenotypeMatrix, pi: &[f64]) -> f64 {
    let c = z.n_subclones();
    debug_assert_eq!(pi.len(), c * NUM_CODES);
    let mut acc = 0.0;
    for k in 0..z.n_pairs() {
        for cc in 0..c {
            acc += pi[cc * NUM_CODES + z.idx(k, cc)].ln();
        }
    }
    acc
}

/// Log Dirichlet(d0, d, .., d) prior of one weight row (background first).
pub fn log_prior_w(w_row: &[f64], d0: f64, d: f64) -> f64 {
    let mut alpha = vec![d; w_row.len()];
    alpha[0] = d0;
    dirichlet_logpdf(w_row, &alpha)
}

/// Purity variant: the normal-clone weight is Beta(d1*, d2*) and the
/// remaining weights, rescaled by 1 - w_star, follow the plain Dirichlet.
/// `w_row` holds background + subclones and sums with `w_star` to one.
pub fn log_prior_w_purity(
    w_star: f64,
    w_row: &[f64],
    d1_star: f64,
    d2_star: f64,
    d0: f64,
    d: f64,
) -> f64 {
    if w_star <= 0.0 || w_star >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let rest = 1.0 - w_star;
    let scaled: Vec<f64> = w_row.iter().map(|&x| x / rest).collect();
    // the map from the scaled to the raw coordinates has Jacobian rest^m
    // over the m free coordinates
    let m = w_row.len() as f64 - 1.0;
    beta_logpdf(w_star, d1_star, d2_star) + log_prior_w(&scaled, d0, d) - m * rest.ln()
}

/// Log prior of the noise vector: independent Dirichlets on the three
/// missingness groups.
pub fn log_prior_rho(rho: &NoiseVector, d1: f64) -> f64 {
    let complete: Vec<f64> = (0..4).map(|g| rho.0[g]).collect();
    let left = [rho.0[4], rho.0[5]];
    let right = [rho.0[6], rho.0[7]];
    dirichlet_logpdf(&complete, &[d1; 4])
        + dirichlet_logpdf(&left, &[2.0 * d1; 2])
        + dirichlet_logpdf(&right, &[2.0 * d1; 2])
}

/// Normalize unscaled abundances into weights. With Gamma(d0, 1) for the
/// background slot and Gamma(d, 1) for the rest this reproduces the
/// Dirichlet prior.
pub fn theta_to_w(theta: &[f64]) -> Vec<f64> {
    let s: f64 = theta.iter().sum();
    theta.iter().map(|&x| x / s).collect()
}

/// Normalize unscaled noise levels groupwise.
pub fn rho_star_to_rho(rho_star: &[f64; NUM_OUTCOMES]) -> NoiseVector {
    let mut rho = [0.0; NUM_OUTCOMES];
    for class in OutcomeClass::ALL {
        let r = class.outcome_range();
        let s: f64 = r.clone().map(|g| rho_star[g]).sum();
        for g in r {
            rho[g] = rho_star[g] / s;
        }
    }
    NoiseVector(rho)
}

/// Prior gamma shape of a noise slot: d1 over the complete group, 2 d1
/// over each missing group.
pub fn rho_star_shape(g: usize, d1: f64) -> f64 {
    if g < 4 {
        d1
    } else {
        2.0 * d1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn geometric_prior_values() {
        let lp = log_prior_c(2, 0.4, GeomSupport::ExponentC);
        assert!((lp - (0.36f64 * 0.4).ln()).abs() < 1e-12);
        // successor ratio is 1 - r under either convention
        for support in [GeomSupport::ExponentC, GeomSupport::ExponentCMinusOne] {
            let ratio = log_prior_c(3, 0.4, support) - log_prior_c(2, 0.4, support);
            assert!((ratio - 0.6f64.ln()).abs() < 1e-12);
        }
        // the printed form sums to 1 - r over C >= 1
        let total: f64 = (1..200).map(|c| log_prior_c(c, 0.4, GeomSupport::ExponentC).exp()).sum();
        assert!((total - 0.6).abs() < 1e-10);
        let total: f64 =
            (1..200).map(|c| log_prior_c(c, 0.4, GeomSupport::ExponentCMinusOne).exp()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn beta_dirichlet_moments() {
        // E[pi_1] = 1 / (1 + alpha/C); alpha = 4, C = 4 gives 1/2, and the
        // symmetric tail splits the rest evenly
        let bd = BetaDirichlet::symmetric(4.0, 4, 2.0, NUM_CODES);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sums = vec![0.0; NUM_CODES];
        for _ in 0..n {
            let pi = bd.sample(&mut rng);
            for (s, v) in sums.iter_mut().zip(&pi) {
                *s += v;
            }
        }
        let mean1 = sums[0] / n as f64;
        // Var of Be(1,1) draw is 1/12; 3 standard errors
        let se = (1.0f64 / 12.0 / n as f64).sqrt();
        assert!((mean1 - 0.5).abs() < 3.0 * se, "mean {mean1}");
        for q in 1..NUM_CODES {
            let m = sums[q] / n as f64;
            let expect = 0.5 / 9.0;
            assert!((m - expect).abs() < 5e-3, "tail mean {m} vs {expect}");
        }
    }

    #[test]
    fn beta_dirichlet_logpdf_normalizes_q3() {
        // midpoint-grid integration over the 2-simplex for a reduced
        // Q = 3 column; parameters above one keep the density bounded so
        // the coarse grid converges
        let bd = BetaDirichlet { b: 1.7, gamma: vec![1.3, 1.6] };
        let n = 600;
        let h = 1.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x1 = (i as f64 + 0.5) * h;
                let x2 = (j as f64 + 0.5) * h;
                if x1 + x2 >= 1.0 {
                    continue;
                }
                let x = [x1, x2, 1.0 - x1 - x2];
                total += bd.logpdf(&x).exp() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 1e-2, "integral {total}");
    }

    #[test]
    fn sampler_logpdf_consistency_importance_weights() {
        // E_sample[ exp(other_logpdf - logpdf) ] = 1 for every
        // sampler/logpdf pair against a fixed alternative with matching
        // support
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let check = |name: &str, mean: f64, se: f64| {
            assert!((mean - 1.0).abs() < 4.0 * se.max(1e-4), "{name}: mean {mean}, se {se}");
        };
        let run = |rng: &mut ChaCha8Rng, mut draw: Box<dyn FnMut(&mut ChaCha8Rng) -> f64>| {
            let (mut acc, mut acc2) = (0.0, 0.0);
            for _ in 0..n {
                let w = draw(rng).exp();
                acc += w;
                acc2 += w * w;
            }
            let mean = acc / n as f64;
            (mean, ((acc2 / n as f64 - mean * mean) / n as f64).sqrt())
        };

        let bd = BetaDirichlet::symmetric(4.0, 2, 2.0, 4);
        let (m, se) = run(
            &mut rng,
            Box::new(move |r| {
                let x = bd.sample(r);
                dirichlet_logpdf(&x, &[2.0; 4]) - bd.logpdf(&x)
            }),
        );
        check("beta-dirichlet", m, se);

        let (m, se) = run(
            &mut rng,
            Box::new(|r| {
                let x = sample_dirichlet(r, &[1.5, 2.0, 2.5]);
                dirichlet_logpdf(&x, &[2.0; 3]) - dirichlet_logpdf(&x, &[1.5, 2.0, 2.5])
            }),
        );
        check("dirichlet", m, se);

        let (m, se) = run(
            &mut rng,
            Box::new(|r| {
                let x = sample_beta(r, 2.0, 3.0);
                beta_logpdf(x, 3.0, 3.0) - beta_logpdf(x, 2.0, 3.0)
            }),
        );
        check("beta", m, se);

        let (m, se) = run(
            &mut rng,
            Box::new(|r| {
                let x = sample_gamma(r, 2.0);
                gamma_logpdf(x, 2.5) - gamma_logpdf(x, 2.0)
            }),
        );
        check("gamma", m, se);
    }

    #[test]
    fn z_given_pi_examples() {
        let mut z = GenotypeMatrix::reference(1, 1);
        z.set_idx(0, 0, 2);
        let mut pi = vec![0.1; NUM_CODES];
        pi[2] = 0.2;
        assert!((log_prior_z_given_pi(&z, &pi) - 0.2f64.ln()).abs() < 1e-12);

        let z = GenotypeMatrix::reference(4, 3);
        let pi = vec![0.1; 3 * NUM_CODES];
        let lp = log_prior_z_given_pi(&z, &pi);
        assert!((lp - 12.0 * 0.1f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn z_given_pi_normalizes_by_enumeration() {
        // K = 2, C = 1: sum over all 10^2 configurations is 1
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let bd = BetaDirichlet::symmetric(4.0, 1, 2.0, NUM_CODES);
        let pi = bd.sample(&mut rng);
        let mut total = 0.0;
        for a in 0..NUM_CODES {
            for b in 0..NUM_CODES {
                let mut z = GenotypeMatrix::reference(2, 1);
                z.set_idx(0, 0, a);
                z.set_idx(1, 0, b);
                total += log_prior_z_given_pi(&z, &pi).exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dirichlet_prior_values() {
        // closed form at the simplex center
        let x = [1.0 / 3.0; 3];
        let lp = dirichlet_logpdf(&x, &[0.03, 0.5, 0.5]);
        let expect = ln_gamma(1.03) - ln_gamma(0.03) - 2.0 * ln_gamma(0.5)
            + (0.03 - 1.0) * (1.0f64 / 3.0).ln()
            + 2.0 * (0.5 - 1.0) * (1.0f64 / 3.0).ln();
        assert!((lp - expect).abs() < 1e-12);
        // mean of the background weight
        let d0 = 0.03f64;
        let d = 0.5;
        let c = 2.0;
        assert!((d0 / (d0 + c * d) - 0.029126).abs() < 1e-5);
        // boundary maps to -inf
        assert_eq!(log_prior_w(&[0.0, 0.5, 0.5], d0, d), f64::NEG_INFINITY);
    }

    #[test]
    fn w_sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 100_000;
        let (d0, d, c) = (0.03, 0.5, 2usize);
        let mut alpha = vec![d; c + 1];
        alpha[0] = d0;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += sample_dirichlet(&mut rng, &alpha)[0];
        }
        let mean = acc / n as f64;
        let expect = d0 / (d0 + c as f64 * d);
        let var = expect * (1.0 - expect) / (d0 + c as f64 * d + 1.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean} expect {expect}");
    }

    #[test]
    fn rho_prior_values() {
        // d1 = 1: the complete group is uniform on the 3-simplex with
        // density Gamma(4) = 6, and each missing group is Beta(2,2) with
        // density 1.5 at 1/2
        let rho = NoiseVector([0.25, 0.25, 0.25, 0.25, 0.5, 0.5, 0.5, 0.5]);
        let lp = log_prior_rho(&rho, 1.0);
        let expect = 6.0f64.ln() + 2.0 * 1.5f64.ln();
        assert!((lp - expect).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += sample_dirichlet(&mut rng, &[1.0; 4])[0];
        }
        let mean = acc / n as f64;
        let se = (0.25 * 0.75 / 5.0 / n as f64).sqrt();
        assert!((mean - 0.25).abs() < 3.0 * se);
    }

    #[test]
    fn theta_normalization() {
        let w = theta_to_w(&[1.0, 1.0, 1.0]);
        for x in &w {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let a = theta_to_w(&[0.3, 1.1, 2.2]);
        let b = theta_to_w(&[2.1, 7.7, 15.4]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalized_gammas_match_dirichlet_marginal() {
        // the background slot of normalized Gamma(d0), Gamma(d), Gamma(d)
        // draws is Beta(d0, 2d); check by KS at the 1% level
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let (d0, d) = (0.5, 1.5);
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let th = [sample_gamma(&mut rng, d0), sample_gamma(&mut rng, d), sample_gamma(&mut rng, d)];
            xs.push(theta_to_w(&th)[0]);
        }
        let (dstat, p) = stats::ks_test(&xs, |x| stats::beta_cdf(x, d0, 2.0 * d));
        assert!(p > 0.01, "KS d = {dstat}, p = {p}");
    }

    #[test]
    fn purity_prior_reduces_to_factors() {
        // density at a product point equals Beta * Dirichlet * Jacobian
        let w_star = 0.3;
        let w_row = [0.07, 0.35, 0.28];
        let lp = log_prior_w_purity(w_star, &w_row, 1.0, 2.0, 0.03, 0.5);
        let scaled: Vec<f64> = w_row.iter().map(|x| x / 0.7).collect();
        let expect = beta_logpdf(0.3, 1.0, 2.0)
            + dirichlet_logpdf(&scaled, &[0.03, 0.5, 0.5])
            - 2.0 * 0.7f64.ln();
        assert!((lp - expect).abs() < 1e-12);
    }
}
