//! Within-model kernel for the flat (independent-column) variant: entrywise
//! Gibbs on the genotypes, conjugate updates of the column frequencies, and
//! log-scale random-walk Metropolis on the unscaled weights and noise
//! levels. All updates target the posterior raised to 1/temper.

use super::tempering::{Kernel, SweepStats};
use super::{RHO_FLOOR, THETA_CEIL, THETA_FLOOR, W0_FLOOR};
use crate::genotype::{match_table, GenotypeMatrix, ReadOutcome, NUM_CODES, NUM_OUTCOMES};
use crate::likelihood::{NoiseVector, ReadCounts, Weights};
use crate::priors::{rho_star_shape, sample_beta, sample_dirichlet, sample_gamma, BetaDirichlet, Hyperparams};
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::{Arc, OnceLock};

/// Match probabilities doubled and truncated to an index in {0, 1, 2},
/// used to share the three possible log terms across candidate codes.
fn level_table() -> &'static [[usize; NUM_OUTCOMES]; NUM_CODES] {
    static TABLE: OnceLock<[[usize; NUM_OUTCOMES]; NUM_CODES]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mt = match_table();
        let mut t = [[0usize; NUM_OUTCOMES]; NUM_CODES];
        for q in 0..NUM_CODES {
            for g in 0..NUM_OUTCOMES {
                t[q][g] = (2.0 * mt[q][g]) as usize;
            }
        }
        t
    })
}

/// Draw from a categorical given unnormalized log masses (max-subtracted
/// exponentiation; the fallthrough on float roundoff picks the last
/// reachable index).
pub(crate) fn categorical_from_log<R: Rng + ?Sized>(mass: &[f64], rng: &mut R) -> usize {
    let max = mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite(), "all categorical masses are -inf");
    let total: f64 = mass.iter().map(|&m| (m - max).exp()).sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &m) in mass.iter().enumerate() {
        let p = (m - max).exp();
        if p > 0.0 {
            acc += p;
            last = i;
            if u <= acc {
                return i;
            }
        }
    }
    last
}

/// Sampler state for the flat variant at a fixed subclone count.
#[derive(Clone, Debug)]
pub struct FlatState {
    pub z: GenotypeMatrix,
    /// Genotype frequencies, row-major C x 10 over canonical ranks.
    pub pi: Vec<f64>,
    /// Unscaled abundances, row-major T x (C+1); slot 0 is the background.
    pub theta: Vec<f64>,
    /// Per-sample (u, v) gammas behind the normal-clone weight
    /// u / (u + v); purity variant only.
    pub pur: Option<Vec<[f64; 2]>>,
    pub rho_star: [f64; NUM_OUTCOMES],
    /// Cached groupwise-normalized noise.
    pub rho: [f64; NUM_OUTCOMES],
    /// Cached subclone mixture sum_{c>=1} theta_tc A(g, z_kc), (t,k,g).
    umix: Vec<f64>,
    /// Cached per-sample theta totals.
    theta_sum: Vec<f64>,
}

impl FlatState {
    fn w_star(&self, t: usize) -> f64 {
        match &self.pur {
            Some(uv) => uv[t][0] / (uv[t][0] + uv[t][1]),
            None => 0.0,
        }
    }

    /// Population frequencies implied by the unscaled abundances.
    pub fn weights(&self) -> Weights {
        let t_n = self.theta_sum.len();
        let cplus = self.theta.len() / t_n;
        let mut rows = Vec::with_capacity(t_n);
        let mut stars = Vec::with_capacity(t_n);
        for t in 0..t_n {
            let ws = self.w_star(t);
            let scale = (1.0 - ws) / self.theta_sum[t];
            rows.push((0..cplus).map(|s| self.theta[t * cplus + s] * scale).collect());
            stars.push(ws);
        }
        if self.pur.is_some() {
            Weights::with_star(rows, stars)
        } else {
            Weights::new(rows)
        }
    }

    pub fn noise(&self) -> NoiseVector {
        NoiseVector(self.rho)
    }
}

/// Flat-variant kernel bound to one count table and one subclone count.
pub struct FlatKernel {
    pub counts: Arc<ReadCounts>,
    pub hyper: Hyperparams,
    pub c: usize,
    pub purity: bool,
    pub step_theta: f64,
    pub step_rho: f64,
    /// Cleared only by the sampler-correctness mutation test.
    pub theta_jacobian: bool,
}

impl FlatKernel {
    pub fn new(
        counts: Arc<ReadCounts>,
        hyper: Hyperparams,
        c: usize,
        purity: bool,
        step_theta: f64,
        step_rho: f64,
    ) -> Self {
        Self { counts, hyper, c, purity, step_theta, step_rho, theta_jacobian: true }
    }

    fn n_samples(&self) -> usize {
        self.counts.n_samples()
    }

    fn n_pairs(&self) -> usize {
        self.counts.n_pairs()
    }

    /// Rebuild the derived caches after editing the state directly.
    pub fn refresh_caches(&self, st: &mut FlatState) {
        let (t_n, k_n) = (self.n_samples(), self.n_pairs());
        let cplus = self.c + 1;
        let mt = match_table();
        st.theta_sum =
            (0..t_n).map(|t| st.theta[t * cplus..(t + 1) * cplus].iter().sum()).collect();
        st.umix.clear();
        st.umix.resize(t_n * k_n * NUM_OUTCOMES, 0.0);
        for t in 0..t_n {
            for k in 0..k_n {
                let base = (t * k_n + k) * NUM_OUTCOMES;
                for c in 0..self.c {
                    let th = st.theta[t * cplus + c + 1];
                    let row = &mt[st.z.idx(k, c)];
                    for g in 0..NUM_OUTCOMES {
                        st.umix[base + g] += th * row[g];
                    }
                }
            }
        }
        st.rho = crate::priors::rho_star_to_rho(&st.rho_star).0;
    }

    /// Conditional outcome probabilities of the current state.
    pub fn read_probs(&self, st: &FlatState, t: usize, k: usize) -> [f64; NUM_OUTCOMES] {
        let k_n = self.n_pairs();
        let cplus = self.c + 1;
        let ws = st.w_star(t);
        let scale = (1.0 - ws) / st.theta_sum[t];
        let th0 = st.theta[t * cplus];
        let a1 = &match_table()[0];
        let base = (t * k_n + k) * NUM_OUTCOMES;
        std::array::from_fn(|g| {
            scale * (st.umix[base + g] + th0 * st.rho[g]) + ws * a1[g]
        })
    }

    /// Log-likelihood kernel of any same-shape count table at the state.
    pub fn log_lik_counts(&self, counts: &ReadCounts, st: &FlatState) -> f64 {
        let (t_n, k_n) = (counts.n_samples(), counts.n_pairs());
        let mut acc = 0.0;
        for t in 0..t_n {
            for k in 0..k_n {
                let p = self.read_probs(st, t, k);
                let row = counts.row(t, k);
                for g in 0..NUM_OUTCOMES {
                    if row[g] > 0.0 {
                        acc += row[g] * p[g].ln();
                    }
                }
            }
        }
        acc
    }

    fn sample_loglik(&self, st: &FlatState, t: usize) -> f64 {
        let k_n = self.n_pairs();
        let mut acc = 0.0;
        for k in 0..k_n {
            let p = self.read_probs(st, t, k);
            let row = self.counts.row(t, k);
            for g in 0..NUM_OUTCOMES {
                if row[g] > 0.0 {
                    acc += row[g] * p[g].ln();
                }
            }
        }
        acc
    }

    fn update_z<R: Rng + ?Sized>(&self, st: &mut FlatState, temper: f64, rng: &mut R) {
        let (t_n, k_n) = (self.n_samples(), self.n_pairs());
        let cplus = self.c + 1;
        let mt = match_table();
        let levels = level_table();
        for k in 0..k_n {
            for c in 0..self.c {
                let cur = st.z.idx(k, c);
                let mut mass = [0.0f64; NUM_CODES];
                for t in 0..t_n {
                    let row = self.counts.row(t, k);
                    let th_c = st.theta[t * cplus + c + 1];
                    let th_0 = st.theta[t * cplus];
                    let ws = st.w_star(t);
                    let scale = (1.0 - ws) / st.theta_sum[t];
                    let a1 = &mt[0];
                    let base = (t * k_n + k) * NUM_OUTCOMES;
                    for g in 0..NUM_OUTCOMES {
                        let n = row[g];
                        if n == 0.0 {
                            continue;
                        }
                        // the subtraction can cancel to a tiny negative
                        let rest = (st.umix[base + g] - th_c * mt[cur][g]).max(0.0);
                        let inner = rest + th_0 * st.rho[g];
                        let star = ws * a1[g];
                        let lp = [
                            n * (scale * inner + star).ln(),
                            n * (scale * (inner + 0.5 * th_c) + star).ln(),
                            n * (scale * (inner + th_c) + star).ln(),
                        ];
                        for q in 0..NUM_CODES {
                            mass[q] += lp[levels[q][g]];
                        }
                    }
                }
                let pi_c = &st.pi[c * NUM_CODES..(c + 1) * NUM_CODES];
                for q in 0..NUM_CODES {
                    mass[q] = (mass[q] + pi_c[q].ln()) / temper;
                }
                let new = categorical_from_log(&mass, rng);
                if new != cur {
                    st.z.set_idx(k, c, new);
                    for t in 0..t_n {
                        let th_c = st.theta[t * cplus + c + 1];
                        let base = (t * k_n + k) * NUM_OUTCOMES;
                        for g in 0..NUM_OUTCOMES {
                            st.umix[base + g] += th_c * (mt[new][g] - mt[cur][g]);
                        }
                    }
                }
            }
        }
    }

    /// Joint draw of one random column pair of row k from its exact
    /// conditional. Entrywise updates cannot move a mutation between two
    /// columns without passing through a state that explains it in
    /// neither; this move crosses directly.
    fn update_z_pairwise<R: Rng + ?Sized>(&self, st: &mut FlatState, temper: f64, rng: &mut R) {
        if self.c < 2 {
            return;
        }
        let (t_n, k_n) = (self.n_samples(), self.n_pairs());
        let cplus = self.c + 1;
        let mt = match_table();
        let levels = level_table();
        for k in 0..k_n {
            let c1 = rng.gen_range(0..self.c);
            let c2 = (c1 + rng.gen_range(1..self.c)) % self.c;
            let (cur1, cur2) = (st.z.idx(k, c1), st.z.idx(k, c2));
            let mut mass = [0.0f64; NUM_CODES * NUM_CODES];
            for t in 0..t_n {
                let row = self.counts.row(t, k);
                let th_1 = st.theta[t * cplus + c1 + 1];
                let th_2 = st.theta[t * cplus + c2 + 1];
                let th_0 = st.theta[t * cplus];
                let ws = st.w_star(t);
                let scale = (1.0 - ws) / st.theta_sum[t];
                let a1 = &mt[0];
                let base = (t * k_n + k) * NUM_OUTCOMES;
                for g in 0..NUM_OUTCOMES {
                    let n = row[g];
                    if n == 0.0 {
                        continue;
                    }
                    let rest = (st.umix[base + g] - th_1 * mt[cur1][g] - th_2 * mt[cur2][g])
                        .max(0.0);
                    let inner = rest + th_0 * st.rho[g];
                    let star = ws * a1[g];
                    let mut lp = [[0.0f64; 3]; 3];
                    for (l1, lp_row) in lp.iter_mut().enumerate() {
                        for (l2, v) in lp_row.iter_mut().enumerate() {
                            let x = inner + 0.5 * l1 as f64 * th_1 + 0.5 * l2 as f64 * th_2;
                            *v = n * (scale * x + star).ln();
                        }
                    }
                    for q1 in 0..NUM_CODES {
                        let l1 = levels[q1][g];
                        let m_row = &mut mass[q1 * NUM_CODES..(q1 + 1) * NUM_CODES];
                        for (q2, m) in m_row.iter_mut().enumerate() {
                            *m += lp[l1][levels[q2][g]];
                        }
                    }
                }
            }
            let pi_1 = &st.pi[c1 * NUM_CODES..(c1 + 1) * NUM_CODES];
            let pi_2 = &st.pi[c2 * NUM_CODES..(c2 + 1) * NUM_CODES];
            for q1 in 0..NUM_CODES {
                for q2 in 0..NUM_CODES {
                    mass[q1 * NUM_CODES + q2] =
                        (mass[q1 * NUM_CODES + q2] + pi_1[q1].ln() + pi_2[q2].ln()) / temper;
                }
            }
            let pick = categorical_from_log(&mass, rng);
            let (new1, new2) = (pick / NUM_CODES, pick % NUM_CODES);
            if new1 != cur1 || new2 != cur2 {
                st.z.set_idx(k, c1, new1);
                st.z.set_idx(k, c2, new2);
                for t in 0..t_n {
                    let th_1 = st.theta[t * cplus + c1 + 1];
                    let th_2 = st.theta[t * cplus + c2 + 1];
                    let base = (t * k_n + k) * NUM_OUTCOMES;
                    for g in 0..NUM_OUTCOMES {
                        st.umix[base + g] += th_1 * (mt[new1][g] - mt[cur1][g])
                            + th_2 * (mt[new2][g] - mt[cur2][g]);
                    }
                }
            }
        }
    }

    fn update_pi<R: Rng + ?Sized>(&self, st: &mut FlatState, temper: f64, rng: &mut R) {
        let k_n = self.n_pairs() as f64;
        for c in 0..self.c {
            let mut m = [0usize; NUM_CODES];
            for k in 0..self.n_pairs() {
                m[st.z.idx(k, c)] += 1;
            }
            let a = m[0] as f64 / temper + 1.0;
            let b = (k_n - m[0] as f64 + self.hyper.alpha / self.c as f64 - 1.0) / temper + 1.0;
            let p1 = sample_beta(rng, a, b).clamp(1e-300, 1.0 - 1e-16);
            let alphas: Vec<f64> = (1..NUM_CODES)
                .map(|q| (m[q] as f64 + self.hyper.gamma - 1.0) / temper + 1.0)
                .collect();
            let tail = sample_dirichlet(rng, &alphas);
            st.pi[c * NUM_CODES] = p1;
            for q in 1..NUM_CODES {
                st.pi[c * NUM_CODES + q] = (1.0 - p1) * tail[q - 1];
            }
        }
    }

    /// Log-likelihood of sample t with theta slot `s` set to `th_new`.
    fn sample_loglik_theta(
        &self,
        st: &FlatState,
        t: usize,
        s: usize,
        th_new: f64,
        sum_new: f64,
    ) -> f64 {
        let k_n = self.n_pairs();
        let cplus = self.c + 1;
        let mt = match_table();
        let ws = st.w_star(t);
        let scale = (1.0 - ws) / sum_new;
        let th = st.theta[t * cplus + s];
        let th0 = if s == 0 { th_new } else { st.theta[t * cplus] };
        let delta = th_new - th;
        let a1 = &mt[0];
        let mut acc = 0.0;
        for k in 0..k_n {
            let row = self.counts.row(t, k);
            let base = (t * k_n + k) * NUM_OUTCOMES;
            let arow = if s >= 1 { Some(&mt[st.z.idx(k, s - 1)]) } else { None };
            for g in 0..NUM_OUTCOMES {
                let n = row[g];
                if n == 0.0 {
                    continue;
                }
                let mut mix = st.umix[base + g];
                if let Some(a) = arow {
                    // a negative delta can cancel to a tiny negative
                    mix = (mix + delta * a[g]).max(0.0);
                }
                let inner = mix + th0 * st.rho[g];
                acc += n * (scale * inner + ws * a1[g]).ln();
            }
        }
        acc
    }

    fn update_theta<R: Rng + ?Sized>(
        &self,
        st: &mut FlatState,
        temper: f64,
        rng: &mut R,
        stats: &mut SweepStats,
    ) {
        let (t_n, k_n) = (self.n_samples(), self.n_pairs());
        let cplus = self.c + 1;
        let mt = match_table();
        for t in 0..t_n {
            let mut cur_ll = self.sample_loglik(st, t);
            for s in 0..cplus {
                stats.theta_prop += 1;
                let th = st.theta[t * cplus + s];
                let step: f64 = rng.sample::<f64, _>(StandardNormal) * self.step_theta;
                let th_new = th * step.exp();
                if !(THETA_FLOOR..=THETA_CEIL).contains(&th_new) {
                    continue;
                }
                let sum_new = st.theta_sum[t] - th + th_new;
                let th0_new = if s == 0 { th_new } else { st.theta[t * cplus] };
                if (1.0 - st.w_star(t)) * th0_new / sum_new < W0_FLOOR {
                    continue;
                }
                let new_ll = self.sample_loglik_theta(st, t, s, th_new, sum_new);
                let shape = if s == 0 { self.hyper.d0 } else { self.hyper.d };
                let dln = th_new.ln() - th.ln();
                let mut log_acc =
                    (new_ll - cur_ll + (shape - 1.0) * dln - (th_new - th)) / temper;
                if self.theta_jacobian {
                    log_acc += dln;
                }
                if log_acc >= 0.0 || rng.gen::<f64>().ln() < log_acc {
                    stats.theta_acc += 1;
                    if s >= 1 {
                        let delta = th_new - th;
                        let col = s - 1;
                        for k in 0..k_n {
                            let base = (t * k_n + k) * NUM_OUTCOMES;
                            let a = &mt[st.z.idx(k, col)];
                            for g in 0..NUM_OUTCOMES {
                                st.umix[base + g] += delta * a[g];
                            }
                        }
                    }
                    st.theta[t * cplus + s] = th_new;
                    st.theta_sum[t] = sum_new;
                    cur_ll = new_ll;
                }
            }
        }
    }

    /// Log-likelihood of sample t with the normal-clone weight replaced.
    fn sample_loglik_star(&self, st: &FlatState, t: usize, ws_new: f64) -> f64 {
        let k_n = self.n_pairs();
        let cplus = self.c + 1;
        let scale = (1.0 - ws_new) / st.theta_sum[t];
        let th0 = st.theta[t * cplus];
        let a1 = &match_table()[0];
        let mut acc = 0.0;
        for k in 0..k_n {
            let row = self.counts.row(t, k);
            let base = (t * k_n + k) * NUM_OUTCOMES;
            for g in 0..NUM_OUTCOMES {
                let n = row[g];
                if n == 0.0 {
                    continue;
                }
                let inner = st.umix[base + g] + th0 * st.rho[g];
                acc += n * (scale * inner + ws_new * a1[g]).ln();
            }
        }
        acc
    }

    fn update_pur<R: Rng + ?Sized>(
        &self,
        st: &mut FlatState,
        temper: f64,
        rng: &mut R,
        stats: &mut SweepStats,
    ) {
        let t_n = self.n_samples();
        let cplus = self.c + 1;
        for t in 0..t_n {
            let mut cur_ll = self.sample_loglik(st, t);
            for slot in 0..2 {
                stats.theta_prop += 1;
                let uv = st.pur.as_ref().unwrap()[t];
                let x = uv[slot];
                let step: f64 = rng.sample::<f64, _>(StandardNormal) * self.step_theta;
                let x_new = x * step.exp();
                if !(THETA_FLOOR..=THETA_CEIL).contains(&x_new) {
                    continue;
                }
                let (u_new, v_new) =
                    if slot == 0 { (x_new, uv[1]) } else { (uv[0], x_new) };
                let ws_new = u_new / (u_new + v_new);
                let th0 = st.theta[t * cplus];
                if (1.0 - ws_new) * th0 / st.theta_sum[t] < W0_FLOOR {
                    continue;
                }
                let new_ll = self.sample_loglik_star(st, t, ws_new);
                let shape = if slot == 0 { self.hyper.d1_star } else { self.hyper.d2_star };
                let dln = x_new.ln() - x.ln();
                let mut log_acc = (new_ll - cur_ll + (shape - 1.0) * dln - (x_new - x)) / temper;
                if self.theta_jacobian {
                    log_acc += dln;
                }
                if log_acc >= 0.0 || rng.gen::<f64>().ln() < log_acc {
                    stats.theta_acc += 1;
                    st.pur.as_mut().unwrap()[t][slot] = x_new;
                    cur_ll = new_ll;
                }
            }
        }
    }

    fn update_rho<R: Rng + ?Sized>(
        &self,
        st: &mut FlatState,
        temper: f64,
        rng: &mut R,
        stats: &mut SweepStats,
    ) {
        let (t_n, k_n) = (self.n_samples(), self.n_pairs());
        let cplus = self.c + 1;
        for g in 0..NUM_OUTCOMES {
            stats.rho_prop += 1;
            let grp = ReadOutcome::from_index(g).class().outcome_range();
            let cur = st.rho_star[g];
            let step: f64 = rng.sample::<f64, _>(StandardNormal) * self.step_rho;
            let new = cur * step.exp();
            if !(THETA_FLOOR..=THETA_CEIL).contains(&new) {
                continue;
            }
            let grp_sum: f64 = grp.clone().map(|h| st.rho_star[h]).sum::<f64>() - cur + new;
            let rho_new: Vec<f64> = grp
                .clone()
                .map(|h| if h == g { new / grp_sum } else { st.rho_star[h] / grp_sum })
                .collect();
            if rho_new.iter().any(|&x| x < RHO_FLOOR) {
                continue;
            }
            // likelihood only changes on the group's outcomes
            let mut delta_ll = 0.0;
            for t in 0..t_n {
                let ws = st.w_star(t);
                let scale = (1.0 - ws) / st.theta_sum[t];
                let th0 = st.theta[t * cplus];
                let a1 = &match_table()[0];
                for k in 0..k_n {
                    let row = self.counts.row(t, k);
                    let base = (t * k_n + k) * NUM_OUTCOMES;
                    for (i, h) in grp.clone().enumerate() {
                        let n = row[h];
                        if n == 0.0 {
                            continue;
                        }
                        let p_old = scale * (st.umix[base + h] + th0 * st.rho[h]) + ws * a1[h];
                        let p_new = scale * (st.umix[base + h] + th0 * rho_new[i]) + ws * a1[h];
                        delta_ll += n * (p_new.ln() - p_old.ln());
                    }
                }
            }
            let shape = rho_star_shape(g, self.hyper.d1);
            let dln = new.ln() - cur.ln();
            let mut log_acc = (delta_ll + (shape - 1.0) * dln - (new - cur)) / temper;
            if self.theta_jacobian {
                log_acc += dln;
            }
            if log_acc >= 0.0 || rng.gen::<f64>().ln() < log_acc {
                stats.rho_acc += 1;
                st.rho_star[g] = new;
                for (i, h) in grp.enumerate() {
                    st.rho[h] = rho_new[i];
                }
            }
        }
    }
}

impl Kernel for FlatKernel {
    type State = FlatState;

    fn init_state(&self, rng: &mut ChaCha8Rng) -> Result<FlatState> {
        let (t_n, k_n) = (self.n_samples(), self.n_pairs());
        let cplus = self.c + 1;
        let bd = BetaDirichlet::symmetric(self.hyper.alpha, self.c, self.hyper.gamma, NUM_CODES);
        let mut pi = Vec::with_capacity(self.c * NUM_CODES);
        for _ in 0..self.c {
            pi.extend(bd.sample(rng));
        }
        let mut z = GenotypeMatrix::reference(k_n, self.c);
        for k in 0..k_n {
            for c in 0..self.c {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut idx = NUM_CODES - 1;
                for (q, &p) in pi[c * NUM_CODES..(c + 1) * NUM_CODES].iter().enumerate() {
                    acc += p;
                    if u <= acc {
                        idx = q;
                        break;
                    }
                }
                z.set_idx(k, c, idx);
            }
        }
        // The kernels restrict the support: theta within its bounds and
        // the background weight above its floor. Rejection here draws the
        // initial state from exactly that restricted prior.
        let mut theta = Vec::with_capacity(t_n * cplus);
        let mut pur_rows: Vec<[f64; 2]> = Vec::with_capacity(t_n);
        for _ in 0..t_n {
            loop {
                let mut row: Vec<f64> = Vec::with_capacity(cplus);
                row.push(sample_gamma(rng, self.hyper.d0));
                for _ in 0..self.c {
                    row.push(sample_gamma(rng, self.hyper.d));
                }
                let uv = [
                    sample_gamma(rng, self.hyper.d1_star),
                    sample_gamma(rng, self.hyper.d2_star),
                ];
                let ws = if self.purity { uv[0] / (uv[0] + uv[1]) } else { 0.0 };
                let sum: f64 = row.iter().sum();
                let ok = row.iter().all(|&x| (THETA_FLOOR..=THETA_CEIL).contains(&x))
                    && (!self.purity
                        || uv.iter().all(|&x| (THETA_FLOOR..=THETA_CEIL).contains(&x)))
                    && (1.0 - ws) * row[0] / sum >= W0_FLOOR;
                if ok {
                    theta.extend(row);
                    pur_rows.push(uv);
                    break;
                }
            }
        }
        let mut rho_star = [0.0; NUM_OUTCOMES];
        loop {
            for (g, r) in rho_star.iter_mut().enumerate() {
                *r = sample_gamma(rng, rho_star_shape(g, self.hyper.d1));
            }
            let rho = crate::priors::rho_star_to_rho(&rho_star);
            if rho_star.iter().all(|&x| (THETA_FLOOR..=THETA_CEIL).contains(&x))
                && rho.0.iter().all(|&x| x >= RHO_FLOOR)
            {
                break;
            }
        }
        let pur = self.purity.then_some(pur_rows);
        let mut st = FlatState {
            z,
            pi,
            theta,
            pur,
            rho_star,
            rho: [0.0; NUM_OUTCOMES],
            umix: Vec::new(),
            theta_sum: Vec::new(),
        };
        self.refresh_caches(&mut st);
        Ok(st)
    }

    fn sweep(
        &self,
        st: &mut FlatState,
        temper: f64,
        rng: &mut ChaCha8Rng,
        stats: &mut SweepStats,
    ) {
        self.refresh_caches(st);
        self.update_z(st, temper, rng);
        self.update_z_pairwise(st, temper, rng);
        self.update_pi(st, temper, rng);
        self.update_theta(st, temper, rng, stats);
        if self.purity {
            self.update_pur(st, temper, rng, stats);
        }
        self.update_rho(st, temper, rng, stats);
    }

    fn log_posterior(&self, st: &FlatState) -> f64 {
        let mut lp = self.log_lik_counts(&self.counts, st);
        // genotypes given the column frequencies
        for k in 0..self.n_pairs() {
            for c in 0..self.c {
                lp += st.pi[c * NUM_CODES + st.z.idx(k, c)].ln();
            }
        }
        // column frequencies (unnormalized Beta-Dirichlet)
        let b = self.hyper.alpha / self.c as f64;
        for c in 0..self.c {
            let p1 = st.pi[c * NUM_CODES];
            let rest = 1.0 - p1;
            lp += (b - 1.0) * rest.ln();
            for q in 1..NUM_CODES {
                lp += (self.hyper.gamma - 1.0) * (st.pi[c * NUM_CODES + q] / rest).ln();
            }
        }
        // unscaled abundances (unnormalized gamma priors)
        let cplus = self.c + 1;
        for t in 0..self.n_samples() {
            for s in 0..cplus {
                let th = st.theta[t * cplus + s];
                let shape = if s == 0 { self.hyper.d0 } else { self.hyper.d };
                lp += (shape - 1.0) * th.ln() - th;
            }
        }
        if let Some(uv) = &st.pur {
            for t in 0..self.n_samples() {
                lp += (self.hyper.d1_star - 1.0) * uv[t][0].ln() - uv[t][0];
                lp += (self.hyper.d2_star - 1.0) * uv[t][1].ln() - uv[t][1];
            }
        }
        for g in 0..NUM_OUTCOMES {
            let shape = rho_star_shape(g, self.hyper.d1);
            lp += (shape - 1.0) * st.rho_star[g].ln() - st.rho_star[g];
        }
        lp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::stream_rng;
    use crate::stats;
    use rand::SeedableRng;

    fn zero_kernel(t: usize, k: usize, c: usize) -> FlatKernel {
        FlatKernel::new(
            Arc::new(ReadCounts::zeros(t, k)),
            Hyperparams::default(),
            c,
            false,
            0.2,
            0.1,
        )
    }

    #[test]
    fn caches_match_direct_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let spec = crate::simulate::SimSpec::sim1();
        let (counts, _) = crate::simulate::generate(&spec, &mut rng).unwrap();
        let kernel = FlatKernel::new(
            Arc::new(counts),
            Hyperparams::default(),
            3,
            false,
            0.2,
            0.1,
        );
        let mut st = kernel.init_state(&mut rng).unwrap();
        let mut stats = SweepStats::default();
        for _ in 0..5 {
            kernel.sweep(&mut st, 1.0, &mut rng, &mut stats);
        }
        // read_probs through the caches equals the public construction
        let w = st.weights();
        let rho = st.noise();
        for t in 0..kernel.n_samples() {
            for k in [0usize, 7, 39] {
                let fast = kernel.read_probs(&st, t, k);
                let slow =
                    crate::likelihood::conditional_read_probs(&st.z, &w, &rho, t, k).unwrap();
                for g in 0..NUM_OUTCOMES {
                    assert!((fast[g] - slow[g]).abs() < 1e-12, "g={g}: {} vs {}", fast[g], slow[g]);
                }
            }
        }
        // and the kernel log-likelihood matches the public one
        let fast = kernel.log_lik_counts(&kernel.counts, &st);
        let slow =
            crate::likelihood::log_likelihood(&kernel.counts, &st.z, &w, &rho, 1.0).unwrap();
        assert!((fast - slow).abs() < 1e-9 * slow.abs().max(1.0));
    }

    #[test]
    fn z_conditional_matches_direct_enumeration() {
        // one pair, one subclone: draw frequencies must match the exact
        // normalized conditional computed through the public likelihood
        let mut counts = ReadCounts::zeros(1, 1);
        counts.set_row(0, 0, [24.0, 3.0, 2.0, 11.0, 9.0, 4.0, 6.0, 1.0]);
        let kernel =
            FlatKernel::new(Arc::new(counts), Hyperparams::default(), 1, false, 0.2, 0.1);
        let mut rng = stream_rng(61, 0);
        let mut st = kernel.init_state(&mut rng).unwrap();
        kernel.refresh_caches(&mut st);
        let w = st.weights();
        let rho = st.noise();
        // exact masses per candidate code
        let mut log_mass = [0.0f64; NUM_CODES];
        for q in 0..NUM_CODES {
            let mut z = st.z.clone();
            z.set_idx(0, 0, q);
            let ll =
                crate::likelihood::log_likelihood(&kernel.counts, &z, &w, &rho, 1.0).unwrap();
            log_mass[q] = ll + st.pi[q].ln();
        }
        let mx = log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = log_mass.iter().map(|m| (m - mx).exp()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        // empirical frequencies of the Gibbs draw from a fixed state
        let mut counts_q = [0u64; NUM_CODES];
        let n = 100_000;
        for _ in 0..n {
            let mut trial = st.clone();
            kernel.update_z(&mut trial, 1.0, &mut rng);
            counts_q[trial.z.idx(0, 0)] += 1;
        }
        let (stat, p) = stats::chi2_gof(&counts_q, &probs);
        assert!(p > 0.01, "chi2 {stat}, p {p}");
    }

    #[test]
    fn pairwise_z_conditional_matches_direct_enumeration() {
        // one pair, two subclones: the joint column draw must follow the
        // exact normalized conditional over all 100 code pairs
        let mut counts = ReadCounts::zeros(1, 1);
        counts.set_row(0, 0, [18.0, 6.0, 3.0, 8.0, 7.0, 5.0, 4.0, 2.0]);
        let kernel =
            FlatKernel::new(Arc::new(counts), Hyperparams::default(), 2, false, 0.2, 0.1);
        let mut rng = stream_rng(68, 0);
        let mut st = kernel.init_state(&mut rng).unwrap();
        kernel.refresh_caches(&mut st);
        let w = st.weights();
        let rho = st.noise();
        let mut log_mass = vec![0.0f64; NUM_CODES * NUM_CODES];
        for q1 in 0..NUM_CODES {
            for q2 in 0..NUM_CODES {
                let mut z = st.z.clone();
                z.set_idx(0, 0, q1);
                z.set_idx(0, 1, q2);
                let ll =
                    crate::likelihood::log_likelihood(&kernel.counts, &z, &w, &rho, 1.0).unwrap();
                log_mass[q1 * NUM_CODES + q2] =
                    ll + st.pi[q1].ln() + st.pi[NUM_CODES + q2].ln();
            }
        }
        let mx = log_mass.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = log_mass.iter().map(|m| (m - mx).exp()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let mut counts_q = vec![0u64; NUM_CODES * NUM_CODES];
        let n = 200_000;
        for _ in 0..n {
            let mut trial = st.clone();
            kernel.update_z_pairwise(&mut trial, 1.0, &mut rng);
            counts_q[trial.z.idx(0, 0) * NUM_CODES + trial.z.idx(0, 1)] += 1;
        }
        // pool tiny-probability cells so the chi-square is well behaved
        let mut obs = Vec::new();
        let mut exp = Vec::new();
        let (mut rest_o, mut rest_e) = (0u64, 0.0f64);
        for (o, p) in counts_q.iter().zip(&probs) {
            if p * n as f64 >= 10.0 {
                obs.push(*o);
                exp.push(*p);
            } else {
                rest_o += o;
                rest_e += p;
            }
        }
        obs.push(rest_o);
        exp.push(rest_e);
        let (stat, p) = stats::chi2_gof(&obs, &exp);
        assert!(p > 0.01, "chi2 {stat}, p {p}");
    }

    #[test]
    fn zero_count_z_conditional_equals_pi() {
        let kernel = zero_kernel(1, 1, 1);
        let mut rng = stream_rng(62, 0);
        let mut st = kernel.init_state(&mut rng).unwrap();
        // put a known frequency row in place
        let pi = vec![0.05, 0.2, 0.05, 0.1, 0.05, 0.15, 0.05, 0.05, 0.25, 0.05];
        st.pi.copy_from_slice(&pi);
        kernel.refresh_caches(&mut st);
        let mut counts_q = [0u64; NUM_CODES];
        let n = 200_000;
        for _ in 0..n {
            let mut trial = st.clone();
            kernel.update_z(&mut trial, 1.0, &mut rng);
            counts_q[trial.z.idx(0, 0)] += 1;
        }
        let (stat, p) = stats::chi2_gof(&counts_q, &pi);
        assert!(p > 0.01, "chi2 {stat}, p {p}");
    }

    #[test]
    fn point_mass_pi_forces_entry() {
        let mut counts = ReadCounts::zeros(1, 1);
        counts.set_row(0, 0, [500.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let kernel = FlatKernel::new(Arc::new(counts), Hyperparams::default(), 1, false, 0.2, 0.1);
        let mut rng = stream_rng(63, 0);
        let mut st = kernel.init_state(&mut rng).unwrap();
        let mut pi = vec![0.0; NUM_CODES];
        pi[9] = 1.0; // all mass on the fully mutated genotype
        st.pi.copy_from_slice(&pi);
        kernel.refresh_caches(&mut st);
        for _ in 0..20 {
            kernel.update_z(&mut st, 1.0, &mut rng);
            assert_eq!(st.z.idx(0, 0), 9);
        }
    }

    #[test]
    fn conjugate_pi_update_moments() {
        // K = 3, m1 = 2, alpha/C = 1: posterior is Be(3, 2) with mean 0.6
        let kernel = {
            let mut k = zero_kernel(1, 3, 4);
            k.hyper.alpha = 4.0;
            k
        };
        let mut rng = stream_rng(64, 0);
        let mut st = kernel.init_state(&mut rng).unwrap();
        for k in 0..3 {
            st.z.set_idx(k, 0, if k < 2 { 0 } else { 3 });
        }
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            kernel.update_pi(&mut st, 1.0, &mut rng);
            acc += st.pi[0];
        }
        let mean = acc / n as f64;
        let se = (0.6 * 0.4 / 6.0f64 / n as f64).sqrt();
        // MH-free conjugate draws are iid; allow 4 standard errors
        assert!((mean - 0.6).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn prior_recovery_on_zero_counts() {
        // with no data every kernel must leave its prior invariant; d0 is
        // raised so the background-weight floor never binds and the
        // unrestricted gamma law is the exact reference, and the step is
        // widened so the log-scale walk decorrelates within the thinning
        let mut kernel = zero_kernel(1, 2, 1);
        kernel.hyper.d0 = 0.5;
        kernel.step_theta = 1.0;
        kernel.step_rho = 1.0;
        let mut rng = stream_rng(65, 0);
        let mut st = kernel.init_state(&mut rng).unwrap();
        let mut stats_acc = SweepStats::default();
        let sweeps = 100_000;
        let mut theta_draws = Vec::with_capacity(sweeps / 50);
        let mut rho_draws = Vec::with_capacity(sweeps / 50);
        let mut pi_draws = Vec::with_capacity(sweeps / 50);
        for i in 0..sweeps {
            kernel.sweep(&mut st, 1.0, &mut rng, &mut stats_acc);
            if i % 50 == 49 {
                theta_draws.push(st.theta[1]);
                rho_draws.push(st.rho_star[0]);
                pi_draws.push(st.pi[0]);
            }
        }
        let d = kernel.hyper.d;
        let (ks_t, p_t) = stats::ks_test(&theta_draws, |x| stats::gamma_cdf(x, d));
        assert!(p_t > 0.01, "theta KS {ks_t}, p {p_t}");
        let (ks_r, p_r) =
            stats::ks_test(&rho_draws, |x| stats::gamma_cdf(x, kernel.hyper.d1));
        assert!(p_r > 0.01, "rho KS {ks_r}, p {p_r}");
        let b = kernel.hyper.alpha / 1.0;
        let (ks_p, p_p) = stats::ks_test(&pi_draws, |x| stats::beta_cdf(x, 1.0, b));
        assert!(p_p > 0.01, "pi KS {ks_p}, p {p_p}");
    }

    #[test]
    fn theta_acceptance_within_sanity_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let (counts, _) = crate::simulate::generate(&crate::simulate::SimSpec::sim1(), &mut rng).unwrap();
        let kernel =
            FlatKernel::new(Arc::new(counts), Hyperparams::default(), 2, false, 0.2, 0.1);
        let mut st = kernel.init_state(&mut rng).unwrap();
        let mut stats_acc = SweepStats::default();
        for _ in 0..400 {
            kernel.sweep(&mut st, 1.0, &mut rng, &mut stats_acc);
        }
        let rate = stats_acc.theta_rate();
        assert!((0.1..=0.9).contains(&rate), "theta acceptance {rate}");
    }

    #[test]
    fn purity_state_weights_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let (counts, _) =
            crate::simulate::generate(&crate::simulate::SimSpec::purity(), &mut rng).unwrap();
        let kernel = FlatKernel::new(Arc::new(counts), Hyperparams::default(), 2, true, 0.2, 0.1);
        let mut st = kernel.init_state(&mut rng).unwrap();
        let mut stats_acc = SweepStats::default();
        for _ in 0..10 {
            kernel.sweep(&mut st, 1.0, &mut rng, &mut stats_acc);
        }
        let w = st.weights();
        w.validate().unwrap();
        assert!(w.w_star.is_some());
    }
}
