//! Observation model: read-outcome probabilities under a subclone mixture,
//! the multinomial log-likelihood kernel, marginal-SNV embedding, empirical
//! missingness rates, and residuals.
//!
//! Only the kernel `sum n * log p` is evaluated; the multinomial
//! coefficient and the missingness-class factors are constant in every
//! sampled parameter and are dropped, which also keeps fractional count
//! splits well-defined.

use crate::genotype::{match_table, GenotypeMatrix, OutcomeClass, NUM_OUTCOMES};
use crate::{CoreError, Result};

/// Read counts over samples (t), mutation pairs (k), and the 8 outcomes.
/// Counts are reals: integer on ingest, fractional after a train/test
/// split.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadCounts {
    t: usize,
    k: usize,
    n: Vec<f64>,
}

impl ReadCounts {
    pub fn zeros(t: usize, k: usize) -> Self {
        Self { t, k, n: vec![0.0; t * k * NUM_OUTCOMES] }
    }

    pub fn from_raw(t: usize, k: usize, n: Vec<f64>) -> Result<Self> {
        if n.len() != t * k * NUM_OUTCOMES {
            return Err(CoreError::Dimension(format!(
                "counts need {} entries, got {}",
                t * k * NUM_OUTCOMES,
                n.len()
            )));
        }
        if n.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(CoreError::Dimension("negative or non-finite count".into()));
        }
        Ok(Self { t, k, n })
    }

    pub fn n_samples(&self) -> usize {
        self.t
    }

    pub fn n_pairs(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn n(&self, t: usize, k: usize, g: usize) -> f64 {
        self.n[(t * self.k + k) * NUM_OUTCOMES + g]
    }

    pub fn set_n(&mut self, t: usize, k: usize, g: usize, v: f64) {
        self.n[(t * self.k + k) * NUM_OUTCOMES + g] = v;
    }

    /// The 8 counts for one (sample, pair).
    #[inline]
    pub fn row(&self, t: usize, k: usize) -> &[f64] {
        let base = (t * self.k + k) * NUM_OUTCOMES;
        &self.n[base..base + NUM_OUTCOMES]
    }

    pub fn set_row(&mut self, t: usize, k: usize, row: [f64; NUM_OUTCOMES]) {
        let base = (t * self.k + k) * NUM_OUTCOMES;
        self.n[base..base + NUM_OUTCOMES].copy_from_slice(&row);
    }

    /// Total reads N for one (sample, pair).
    pub fn total(&self, t: usize, k: usize) -> f64 {
        self.row(t, k).iter().sum()
    }

    /// Grand total over all samples and pairs.
    pub fn grand_total(&self) -> f64 {
        self.n.iter().sum()
    }

    /// Elementwise scaled copy.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { t: self.t, k: self.k, n: self.n.iter().map(|x| x * factor).collect() }
    }

    /// Append the pairs of `other` (same samples) after this one's.
    pub fn concat_pairs(&self, other: &ReadCounts) -> Result<Self> {
        if self.t != other.t {
            return Err(CoreError::Dimension(format!(
                "cannot concatenate counts with {} and {} samples",
                self.t, other.t
            )));
        }
        let k = self.k + other.k;
        let mut out = Self::zeros(self.t, k);
        for t in 0..self.t {
            for kk in 0..self.k {
                let base = (t * k + kk) * NUM_OUTCOMES;
                out.n[base..base + NUM_OUTCOMES].copy_from_slice(self.row(t, kk));
            }
            for kk in 0..other.k {
                let base = (t * k + self.k + kk) * NUM_OUTCOMES;
                out.n[base..base + NUM_OUTCOMES].copy_from_slice(other.row(t, kk));
            }
        }
        Ok(out)
    }

    pub fn raw(&self) -> &[f64] {
        &self.n
    }
}

/// Conditional outcome probabilities of the background (noise) component.
/// The three class groups each sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseVector(pub [f64; NUM_OUTCOMES]);

impl NoiseVector {
    /// Uniform within each class group.
    pub fn uniform() -> Self {
        Self([0.25, 0.25, 0.25, 0.25, 0.5, 0.5, 0.5, 0.5])
    }

    pub fn validate(&self) -> Result<()> {
        for class in OutcomeClass::ALL {
            let s: f64 = class.outcome_range().map(|g| self.0[g]).sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(CoreError::Dimension(format!(
                    "noise group {class:?} sums to {s}, expected 1"
                )));
            }
        }
        if self.0.iter().any(|&x| x <= 0.0) {
            return Err(CoreError::Dimension("noise entry not positive".into()));
        }
        Ok(())
    }
}

/// Population frequencies per sample: `w[t][0]` is the background weight,
/// `w[t][c]` for c >= 1 the subclone weights; `w_star[t]`, when present, is
/// an explicit mutation-free normal-clone weight and completes the row sum
/// to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub w: Vec<Vec<f64>>,
    pub w_star: Option<Vec<f64>>,
}

impl Weights {
    pub fn new(w: Vec<Vec<f64>>) -> Self {
        Self { w, w_star: None }
    }

    pub fn with_star(w: Vec<Vec<f64>>, w_star: Vec<f64>) -> Self {
        Self { w, w_star: Some(w_star) }
    }

    pub fn n_samples(&self) -> usize {
        self.w.len()
    }

    /// Subclone count implied by row length.
    pub fn n_subclones(&self) -> usize {
        self.w[0].len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        for (t, row) in self.w.iter().enumerate() {
            let mut s: f64 = row.iter().sum();
            if let Some(ws) = &self.w_star {
                s += ws[t];
            }
            if (s - 1.0).abs() > 1e-9 {
                return Err(CoreError::Dimension(format!("weight row {t} sums to {s}")));
            }
            if row.iter().any(|&x| x <= 0.0 || x >= 1.0) {
                return Err(CoreError::Dimension(format!("weight row {t} leaves (0,1)")));
            }
        }
        Ok(())
    }
}

/// Empirical missingness-class probabilities per (sample, pair):
/// complete, left-missing, right-missing.
#[derive(Clone, Debug, PartialEq)]
pub struct MissingRates {
    t: usize,
    k: usize,
    v: Vec<[f64; 3]>,
}

impl MissingRates {
    /// Constant rates for all samples and pairs.
    pub fn constant(t: usize, k: usize, v: [f64; 3]) -> Self {
        Self { t, k, v: vec![v; t * k] }
    }

    pub fn from_rows(t: usize, k: usize, v: Vec<[f64; 3]>) -> Result<Self> {
        if v.len() != t * k {
            return Err(CoreError::Dimension(format!(
                "missing rates need {} rows, got {}",
                t * k,
                v.len()
            )));
        }
        Ok(Self { t, k, v })
    }

    pub fn get(&self, t: usize, k: usize) -> [f64; 3] {
        self.v[t * self.k + k]
    }

    pub fn set(&mut self, t: usize, k: usize, v: [f64; 3]) {
        self.v[t * self.k + k] = v;
    }
}

/// Conditional outcome probabilities for one (sample, pair):
/// a weighted sum of genotype match probabilities plus the background
/// noise term (plus the normal-clone term when `w_star` is present).
/// Each missingness group sums to one.
pub fn conditional_read_probs(
    z: &GenotypeMatrix,
    w: &Weights,
    rho: &NoiseVector,
    t: usize,
    k: usize,
) -> Result<[f64; NUM_OUTCOMES]> {
    let c = z.n_subclones();
    if w.w[t].len() != c + 1 {
        return Err(CoreError::Dimension(format!(
            "weight row has {} entries for {} subclones",
            w.w[t].len(),
            c
        )));
    }
    let table = match_table();
    // every term w * A is an exact dyadic product; summing them in sorted
    // order makes the result bitwise invariant under column relabeling
    let mut p = [0.0; NUM_OUTCOMES];
    let mut terms: Vec<f64> = Vec::with_capacity(c);
    for (g, pg) in p.iter_mut().enumerate() {
        terms.clear();
        for cc in 0..c {
            terms.push(w.w[t][cc + 1] * table[z.idx(k, cc)][g]);
        }
        terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = 0.0;
        for &x in &terms {
            acc += x;
        }
        acc += w.w[t][0] * rho.0[g];
        if let Some(ws) = &w.w_star {
            // the normal clone matches exactly the reference outcomes
            acc += ws[t] * table[0][g];
        }
        *pg = acc;
    }
    Ok(p)
}

/// Multinomial log-likelihood kernel `(1/temper) * sum n * log p`, dropping
/// constants. Errors when a positive count meets a zero probability.
pub fn log_likelihood(
    counts: &ReadCounts,
    z: &GenotypeMatrix,
    w: &Weights,
    rho: &NoiseVector,
    temper: f64,
) -> Result<f64> {
    if counts.n_pairs() != z.n_pairs() {
        return Err(CoreError::Dimension(format!(
            "counts have {} pairs, genotypes have {}",
            counts.n_pairs(),
            z.n_pairs()
        )));
    }
    if counts.n_samples() != w.n_samples() {
        return Err(CoreError::Dimension(format!(
            "counts have {} samples, weights have {}",
            counts.n_samples(),
            w.n_samples()
        )));
    }
    let mut acc = 0.0;
    for t in 0..counts.n_samples() {
        for k in 0..counts.n_pairs() {
            let p = conditional_read_probs(z, w, rho, t, k)?;
            let row = counts.row(t, k);
            for g in 0..NUM_OUTCOMES {
                let n = row[g];
                if n > 0.0 {
                    if p[g] <= 0.0 {
                        return Err(CoreError::NonFiniteLikelihood { t, k, g: g + 1, n });
                    }
                    acc += n * p[g].ln();
                }
            }
        }
    }
    Ok(acc / temper)
}

/// Embed a marginal SNV (total, variant) as a mutation-pair count row:
/// every read covers only the first locus, so reference reads land in the
/// reference right-missing class and variant reads in the variant
/// right-missing class.
pub fn embed_snv(total: u64, variant: u64) -> Result<[f64; NUM_OUTCOMES]> {
    if variant > total {
        return Err(CoreError::SnvCounts { total, variant });
    }
    let mut row = [0.0; NUM_OUTCOMES];
    row[6] = (total - variant) as f64;
    row[7] = variant as f64;
    Ok(row)
}

/// Empirical missingness-class rates per (sample, pair). Errors on a
/// zero-coverage pair.
pub fn empirical_missing_rates(counts: &ReadCounts) -> Result<MissingRates> {
    let (t_n, k_n) = (counts.n_samples(), counts.n_pairs());
    let mut rows = Vec::with_capacity(t_n * k_n);
    for t in 0..t_n {
        for k in 0..k_n {
            let tot = counts.total(t, k);
            if tot <= 0.0 {
                return Err(CoreError::ZeroCoverage { t, k });
            }
            let mut v = [0.0; 3];
            for class in OutcomeClass::ALL {
                v[class.index()] =
                    class.outcome_range().map(|g| counts.n(t, k, g)).sum::<f64>() / tot;
            }
            rows.push(v);
        }
    }
    MissingRates::from_rows(t_n, k_n, rows)
}

/// Realized residuals `p_hat - p_bar`, where `p_hat` assembles the fitted
/// conditional probabilities scaled by the empirical missingness rates and
/// `p_bar = n / N`. Flattened (t, k, g) row-major.
pub fn residuals(
    counts: &ReadCounts,
    z: &GenotypeMatrix,
    w: &Weights,
    rho: &NoiseVector,
) -> Result<Vec<f64>> {
    let rates = empirical_missing_rates(counts)?;
    let (t_n, k_n) = (counts.n_samples(), counts.n_pairs());
    let mut out = Vec::with_capacity(t_n * k_n * NUM_OUTCOMES);
    for t in 0..t_n {
        for k in 0..k_n {
            let p = conditional_read_probs(z, w, rho, t, k)?;
            let v = rates.get(t, k);
            let tot = counts.total(t, k);
            for g in 0..NUM_OUTCOMES {
                let class = crate::genotype::ReadOutcome::from_index(g).class();
                let p_hat = v[class.index()] * p[g];
                let p_bar = counts.n(t, k, g) / tot;
                out.push(p_hat - p_bar);
            }
        }
    }
    Ok(out)
}
