//! Synthetic-data generators with known truth, covering the reference
//! simulation designs: single- and multi-sample flat mixtures, the purity
//! variant, marginal-SNV tails, and tree-structured subclones.

use crate::genotype::{CodeOrdering, GenotypeCode, GenotypeMatrix, ReadOutcome, NUM_OUTCOMES};
use crate::likelihood::{conditional_read_probs, MissingRates, NoiseVector, ReadCounts, Weights};
use crate::priors::sample_dirichlet;
use crate::tree::{sample_z_given_tree, TreeTopology};
use crate::{CoreError, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

/// A rectangular block assignment: pairs `k_from..=k_to` (1-based,
/// inclusive) of subclone column `col` (1-based) get `code` (flat
/// ordering).
#[derive(Clone, Debug)]
pub struct Block {
    pub k_from: usize,
    pub k_to: usize,
    pub col: usize,
    pub code: u8,
}

impl Block {
    pub fn new(k_from: usize, k_to: usize, col: usize, code: u8) -> Self {
        Self { k_from, k_to, col, code }
    }
}

/// Genotype truth specification.
#[derive(Clone, Debug)]
pub enum ZSpec {
    Explicit(GenotypeMatrix),
    /// Reference background overlaid with blocks.
    Blocks(Vec<Block>),
    /// Drawn from the tree prior (tree variant only).
    FromTree,
}

/// Weight truth specification (per sample, background weight first).
#[derive(Clone, Debug)]
pub enum WSpec {
    Explicit(Vec<Vec<f64>>),
    /// Background concentration `d0` plus a per-sample random permutation
    /// of the subclone concentrations.
    DirichletSigma { d0: f64, conc: Vec<f64> },
}

/// Noise truth specification.
#[derive(Clone, Debug)]
pub enum RhoSpec {
    Explicit([f64; NUM_OUTCOMES]),
    /// Drawn from the grouped Dirichlet prior.
    Prior { d1: f64 },
}

/// Missingness-class probabilities per pair.
#[derive(Clone, Debug)]
pub enum VSpec {
    Constant([f64; 3]),
    /// First `k_split` pairs use `first`, the rest `second`.
    SplitAt { k_split: usize, first: [f64; 3], second: [f64; 3] },
    PerPair(Vec<[f64; 3]>),
}

impl VSpec {
    fn at(&self, k: usize) -> [f64; 3] {
        match self {
            VSpec::Constant(v) => *v,
            VSpec::SplitAt { k_split, first, second } => {
                if k < *k_split {
                    *first
                } else {
                    *second
                }
            }
            VSpec::PerPair(v) => v[k],
        }
    }
}

/// Full description of a synthetic data set.
#[derive(Clone, Debug)]
pub struct SimSpec {
    pub name: String,
    pub t: usize,
    pub k: usize,
    pub c: usize,
    pub z: ZSpec,
    pub w: WSpec,
    pub rho: RhoSpec,
    pub v: VSpec,
    /// Inclusive range of total reads per (sample, pair).
    pub n_range: (u64, u64),
    /// Model the first subclone as an explicit mutation-free normal clone.
    pub purity: bool,
    /// Number of trailing pairs recorded as marginal SNVs (all reads
    /// right-missing).
    pub snv_tail: usize,
    /// Tree truth: topology plus optional gain rate (defaults to 2K/C).
    pub tree: Option<(TreeTopology, Option<f64>)>,
}

/// The generating configuration and derived quantities, for scoring fits.
#[derive(Clone, Debug)]
pub struct TruthBundle {
    pub z: GenotypeMatrix,
    pub w: Weights,
    pub rho: NoiseVector,
    pub v: MissingRates,
    /// Multinomial probabilities (t, k, g) row-major, classes scaled by v.
    pub p: Vec<f64>,
    pub tree: Option<TreeTopology>,
    pub snv_tail: usize,
}

fn z_from_blocks(k: usize, c: usize, blocks: &[Block]) -> Result<GenotypeMatrix> {
    let mut z = GenotypeMatrix::reference(k, c);
    for b in blocks {
        if b.k_from < 1 || b.k_to > k || b.k_from > b.k_to || b.col < 1 || b.col > c {
            return Err(CoreError::Config(format!(
                "block {b:?} leaves the {k}x{c} genotype matrix"
            )));
        }
        let code = GenotypeCode::new(b.code)?;
        for kk in (b.k_from - 1)..b.k_to {
            z.set_code(kk, b.col - 1, code, CodeOrdering::Flat);
        }
    }
    Ok(z)
}

/// Multinomial draw by chained binomials.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; p.len()];
    let mut rest = n;
    let mut p_rest: f64 = p.iter().sum();
    for (g, &pg) in p.iter().enumerate() {
        if rest == 0 {
            break;
        }
        if g + 1 == p.len() {
            out[g] = rest;
            break;
        }
        if pg <= 0.0 {
            continue;
        }
        let frac = (pg / p_rest).min(1.0);
        let draw = if frac >= 1.0 {
            rest
        } else {
            Binomial::new(rest, frac).expect("binomial probability").sample(rng)
        };
        out[g] = draw;
        rest -= draw;
        p_rest -= pg;
    }
    out
}

/// Generate read counts and the truth bundle for a specification.
pub fn generate(spec: &SimSpec, rng: &mut ChaCha8Rng) -> Result<(ReadCounts, TruthBundle)> {
    if spec.snv_tail > spec.k {
        return Err(CoreError::Config("snv tail exceeds pair count".into()));
    }
    if spec.n_range.0 == 0 || spec.n_range.0 > spec.n_range.1 {
        return Err(CoreError::Config(format!("bad read-depth range {:?}", spec.n_range)));
    }
    // genotypes
    let tree = match (&spec.z, &spec.tree) {
        (ZSpec::FromTree, Some((topo, _))) => {
            if topo.n_nodes() != spec.c {
                return Err(CoreError::Config("tree size differs from subclone count".into()));
            }
            Some(topo.clone())
        }
        (ZSpec::FromTree, None) => {
            return Err(CoreError::Config("tree-drawn genotypes need a topology".into()))
        }
        (_, t) => t.as_ref().map(|(topo, _)| topo.clone()),
    };
    let z = match &spec.z {
        ZSpec::Explicit(z) => {
            if z.n_pairs() != spec.k || z.n_subclones() != spec.c {
                return Err(CoreError::Config("explicit genotype shape mismatch".into()));
            }
            z.clone()
        }
        ZSpec::Blocks(blocks) => z_from_blocks(spec.k, spec.c, blocks)?,
        ZSpec::FromTree => {
            let (topo, lambda) = spec.tree.as_ref().unwrap();
            let lam = lambda.unwrap_or(2.0 * spec.k as f64 / spec.c as f64);
            sample_z_given_tree(topo, spec.k, lam, rng)?
        }
    };
    // weights
    let w = match &spec.w {
        WSpec::Explicit(rows) => {
            if rows.len() != spec.t {
                return Err(CoreError::Config("explicit weights sample mismatch".into()));
            }
            rows.clone()
        }
        WSpec::DirichletSigma { d0, conc } => {
            let mut rows = Vec::with_capacity(spec.t);
            for _ in 0..spec.t {
                let mut alpha = vec![*d0];
                let mut perm = conc.clone();
                perm.shuffle(rng);
                alpha.extend(perm);
                rows.push(sample_dirichlet(rng, &alpha));
            }
            rows
        }
    };
    let weights = if spec.purity {
        // the first subclone component becomes the explicit normal clone
        let mut stars = Vec::with_capacity(spec.t);
        let mut rows = Vec::with_capacity(spec.t);
        for row in w {
            if row.len() != spec.c + 2 {
                return Err(CoreError::Config(format!(
                    "purity weights need background + normal + {} subclones",
                    spec.c
                )));
            }
            stars.push(row[1]);
            let mut r = vec![row[0]];
            r.extend_from_slice(&row[2..]);
            rows.push(r);
        }
        Weights::with_star(rows, stars)
    } else {
        for row in &w {
            if row.len() != spec.c + 1 {
                return Err(CoreError::Config(format!(
                    "weights need background + {} subclones",
                    spec.c
                )));
            }
        }
        Weights::new(w)
    };
    // noise
    let rho = match &spec.rho {
        RhoSpec::Explicit(r) => NoiseVector(*r),
        RhoSpec::Prior { d1 } => {
            let mut r = [0.0; NUM_OUTCOMES];
            let complete = sample_dirichlet(rng, &[*d1; 4]);
            r[..4].copy_from_slice(&complete);
            let left = sample_dirichlet(rng, &[2.0 * d1; 2]);
            r[4] = left[0];
            r[5] = left[1];
            let right = sample_dirichlet(rng, &[2.0 * d1; 2]);
            r[6] = right[0];
            r[7] = right[1];
            NoiseVector(r)
        }
    };
    rho.validate()?;
    // missing-class rates: complete probability balances the pair
    let mut v_rows = Vec::with_capacity(spec.t * spec.k);
    for _t in 0..spec.t {
        for k in 0..spec.k {
            let v = if k >= spec.k - spec.snv_tail {
                [0.0, 0.0, 1.0]
            } else {
                spec.v.at(k)
            };
            let s = v[0] + v[1] + v[2];
            if (s - 1.0).abs() > 1e-9 {
                return Err(CoreError::Config(format!("missingness at pair {k} sums to {s}")));
            }
            v_rows.push(v);
        }
    }
    let v = MissingRates::from_rows(spec.t, spec.k, v_rows)?;

    // assemble p and draw counts
    let mut p_true = Vec::with_capacity(spec.t * spec.k * NUM_OUTCOMES);
    let mut counts = ReadCounts::zeros(spec.t, spec.k);
    for t in 0..spec.t {
        for k in 0..spec.k {
            let cond = conditional_read_probs(&z, &weights, &rho, t, k)?;
            let rates = v.get(t, k);
            let mut p = [0.0; NUM_OUTCOMES];
            for g in 0..NUM_OUTCOMES {
                p[g] = rates[ReadOutcome::from_index(g).class().index()] * cond[g];
            }
            let n_tot = rng.gen_range(spec.n_range.0..=spec.n_range.1);
            let drawn = multinomial(rng, n_tot, &p);
            let mut row = [0.0; NUM_OUTCOMES];
            for g in 0..NUM_OUTCOMES {
                row[g] = drawn[g] as f64;
            }
            counts.set_row(t, k, row);
            p_true.extend_from_slice(&p);
        }
    }
    let truth = TruthBundle {
        z,
        w: weights,
        rho,
        v,
        p: p_true,
        tree,
        snv_tail: spec.snv_tail,
    };
    Ok((counts, truth))
}

/// Generator self-check: empirical outcome frequencies against the
/// generating probabilities.
#[derive(Clone, Debug)]
pub struct RatesReport {
    /// Largest |n/N - p| over all (t, k, g).
    pub max_abs_dev: f64,
    /// Largest deviation standardized by the binomial standard error.
    pub max_std_dev: f64,
}

pub fn empirical_rates_check(counts: &ReadCounts, truth: &TruthBundle) -> RatesReport {
    let (t_n, k_n) = (counts.n_samples(), counts.n_pairs());
    let mut max_abs: f64 = 0.0;
    let mut max_std: f64 = 0.0;
    for t in 0..t_n {
        for k in 0..k_n {
            let n_tot = counts.total(t, k);
            for g in 0..NUM_OUTCOMES {
                let p = truth.p[(t * k_n + k) * NUM_OUTCOMES + g];
                let dev = (counts.n(t, k, g) / n_tot - p).abs();
                max_abs = max_abs.max(dev);
                if p > 0.0 && p < 1.0 {
                    let se = (p * (1.0 - p) / n_tot).sqrt();
                    max_std = max_std.max(dev / se);
                }
            }
        }
    }
    RatesReport { max_abs_dev: max_abs, max_std_dev: max_std }
}

impl SimSpec {
    /// Single-sample, two-subclone design: subclone 1 mutated on pairs
    /// 11..=30, subclone 2 on 21..=40.
    pub fn sim1() -> Self {
        Self {
            name: "sim1".into(),
            t: 1,
            k: 40,
            c: 2,
            z: ZSpec::Blocks(vec![Block::new(11, 30, 1, 4), Block::new(21, 40, 2, 6)]),
            w: WSpec::Explicit(vec![vec![1e-7, 0.8, 0.2 - 1e-7]]),
            rho: RhoSpec::Prior { d1: 1.0 },
            v: VSpec::Constant([0.4, 0.3, 0.3]),
            n_range: (400, 600),
            purity: false,
            snv_tail: 0,
            tree: None,
        }
    }

    /// Four samples, four subclones, 100 pairs; subclone 4 follows the
    /// published block palette.
    pub fn sim2() -> Self {
        Self {
            name: "sim2".into(),
            t: 4,
            k: 100,
            c: 4,
            z: ZSpec::Blocks(vec![
                Block::new(1, 40, 1, 4),
                Block::new(71, 100, 1, 2),
                Block::new(21, 60, 2, 6),
                Block::new(81, 100, 2, 10),
                Block::new(11, 30, 3, 9),
                Block::new(51, 90, 3, 5),
                Block::new(1, 20, 4, 10),
                Block::new(21, 40, 4, 5),
                Block::new(41, 60, 4, 8),
                Block::new(81, 100, 4, 9),
            ]),
            w: WSpec::DirichletSigma { d0: 0.01, conc: vec![20.0, 10.0, 5.0, 2.0] },
            rho: RhoSpec::Prior { d1: 1.0 },
            v: VSpec::SplitAt { k_split: 50, first: [0.4, 0.3, 0.3], second: [0.3, 0.35, 0.35] },
            n_range: (400, 600),
            purity: false,
            snv_tail: 0,
            tree: None,
        }
    }

    /// Six samples, three subclones, 100 pairs.
    pub fn sim3() -> Self {
        Self::sim3_with_pairs(100)
    }

    /// The same three-subclone design scaled to `k` pairs.
    pub fn sim3_with_pairs(k: usize) -> Self {
        let scale = |x: usize| ((x * k) as f64 / 100.0).round() as usize;
        let blocks = vec![
            Block::new(1, scale(30), 1, 4),
            Block::new(scale(30) + 1, scale(50), 1, 2),
            Block::new(scale(80) + 1, k, 1, 7),
            Block::new(scale(20) + 1, scale(60), 2, 6),
            Block::new(scale(60) + 1, scale(80), 2, 9),
            Block::new(1, scale(10), 3, 3),
            Block::new(scale(40) + 1, scale(70), 3, 10),
            Block::new(scale(90) + 1, k, 3, 5),
        ];
        Self {
            name: if k == 100 { "sim3".into() } else { format!("sim3-k{k}") },
            t: 6,
            k,
            c: 3,
            z: ZSpec::Blocks(blocks),
            w: WSpec::DirichletSigma { d0: 0.01, conc: vec![14.0, 6.0, 3.0] },
            rho: RhoSpec::Prior { d1: 1.0 },
            v: VSpec::SplitAt {
                k_split: k / 2,
                first: [0.4, 0.3, 0.3],
                second: [0.3, 0.35, 0.35],
            },
            n_range: (400, 600),
            purity: false,
            snv_tail: 0,
            tree: None,
        }
    }

    /// The three-subclone design with the first subclone replaced by an
    /// explicit normal clone (two tumor subclones remain).
    pub fn purity() -> Self {
        let mut base = Self::sim3();
        let blocks = match &base.z {
            ZSpec::Blocks(blocks) => blocks
                .iter()
                .filter(|b| b.col >= 2)
                .map(|b| Block::new(b.k_from, b.k_to, b.col - 1, b.code))
                .collect(),
            _ => unreachable!(),
        };
        base.name = "purity".into();
        base.c = 2;
        base.z = ZSpec::Blocks(blocks);
        base.purity = true;
        base
    }

    /// The three-subclone design with the phasing of the second half of
    /// the pairs discarded: those pairs are recorded as marginal SNVs.
    pub fn snv_embedded() -> Self {
        let mut s = Self::sim3();
        s.name = "sim3-snv".into();
        s.snv_tail = 50;
        s
    }

    /// Eight samples, five tree-structured subclones.
    pub fn tree2(k: usize) -> Self {
        let topo = TreeTopology::new(vec![0, 1, 2, 2, 1]).expect("preset topology");
        Self {
            name: if k == 100 { "tree2".into() } else { format!("tree2-k{k}") },
            t: 8,
            k,
            c: 5,
            z: ZSpec::FromTree,
            w: WSpec::DirichletSigma { d0: 0.01, conc: vec![25.0, 15.0, 10.0, 8.0, 5.0] },
            rho: RhoSpec::Prior { d1: 1.0 },
            v: VSpec::SplitAt {
                k_split: k / 2,
                first: [0.5, 0.25, 0.25],
                second: [0.4, 0.3, 0.3],
            },
            n_range: (400, 600),
            purity: false,
            snv_tail: 0,
            tree: Some((topo, None)),
        }
    }

    /// Single-sample, four-node tree design at configurable depth.
    pub fn tree1(depth: (u64, u64)) -> Self {
        let topo = TreeTopology::new(vec![0, 1, 1, 2]).expect("preset topology");
        Self {
            name: "tree1".into(),
            t: 1,
            k: 100,
            c: 4,
            z: ZSpec::FromTree,
            w: WSpec::DirichletSigma { d0: 0.01, conc: vec![15.0, 10.0, 8.0, 5.0] },
            rho: RhoSpec::Prior { d1: 1.0 },
            v: VSpec::SplitAt {
                k_split: 50,
                first: [0.5, 0.25, 0.25],
                second: [0.4, 0.3, 0.3],
            },
            n_range: depth,
            purity: false,
            snv_tail: 0,
            tree: Some((topo, None)),
        }
    }

    /// Lung-scale synthetic: 4 samples, 69 mutation pairs plus 69 marginal
    /// SNVs, purity variant with two tumor subclones.
    pub fn lung_scale() -> Self {
        let k = 138;
        let blocks = vec![
            // shared trunk mutations across both subclones
            Block::new(1, 50, 1, 5),
            Block::new(1, 50, 2, 5),
            Block::new(90, 120, 1, 2),
            Block::new(90, 120, 2, 2),
            // private mutations
            Block::new(51, 69, 2, 4),
            Block::new(121, 138, 2, 3),
            Block::new(70, 89, 1, 9),
        ];
        Self {
            name: "lung-scale".into(),
            t: 4,
            k,
            c: 2,
            z: ZSpec::Blocks(blocks),
            w: WSpec::Explicit(vec![
                vec![1e-4, 0.15, 0.55, 0.2999],
                vec![1e-4, 0.12, 0.48, 0.3999],
                vec![1e-4, 0.18, 0.60, 0.2199],
                vec![1e-4, 0.10, 0.52, 0.3799],
            ]),
            rho: RhoSpec::Prior { d1: 1.0 },
            v: VSpec::Constant([0.4, 0.3, 0.3]),
            n_range: (150, 300),
            purity: true,
            snv_tail: 69,
            tree: None,
        }
    }

    /// Look up a preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "sim1" => Ok(Self::sim1()),
            "sim2" => Ok(Self::sim2()),
            "sim3" => Ok(Self::sim3()),
            "sim3-reduced" => Ok(Self::sim3_with_pairs(40)),
            "purity" => Ok(Self::purity()),
            "sim3-snv" => Ok(Self::snv_embedded()),
            "tree1" => Ok(Self::tree1((400, 600))),
            "tree1-deep" => Ok(Self::tree1((1900, 2100))),
            "tree2" => Ok(Self::tree2(100)),
            "tree2-desk" => Ok(Self::tree2(50)),
            "lung-scale" => Ok(Self::lung_scale()),
            other => Err(CoreError::Config(format!("unknown preset '{other}'"))),
        }
    }

    pub const PRESETS: [&'static str; 11] = [
        "sim1",
        "sim2",
        "sim3",
        "sim3-reduced",
        "purity",
        "sim3-snv",
        "tree1",
        "tree1-deep",
        "tree2",
        "tree2-desk",
        "lung-scale",
    ];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::residuals;
    use rand::SeedableRng;

    #[test]
    fn deterministic_given_seed() {
        let spec = SimSpec::sim1();
        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        let (c1, t1) = generate(&spec, &mut r1).unwrap();
        let (c2, t2) = generate(&spec, &mut r2).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(t1.z, t2.z);
        assert_eq!(t1.p, t2.p);
        let mut r3 = ChaCha8Rng::seed_from_u64(43);
        let (c3, _) = generate(&spec, &mut r3).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn totals_match_and_within_range() {
        let spec = SimSpec::sim2();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (counts, truth) = generate(&spec, &mut rng).unwrap();
        for t in 0..spec.t {
            for k in 0..spec.k {
                let tot = counts.total(t, k);
                assert!((400.0..=600.0).contains(&tot));
                // integer totals: the multinomial exhausts N
                assert_eq!(tot.fract(), 0.0);
            }
        }
        // zero-probability outcomes are never drawn
        for (i, &p) in truth.p.iter().enumerate() {
            if p == 0.0 {
                assert_eq!(counts.raw()[i], 0.0);
            }
        }
    }

    #[test]
    fn high_depth_frequencies_approach_truth() {
        let mut spec = SimSpec::sim1();
        spec.n_range = (1_000_000, 1_000_000);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (counts, truth) = generate(&spec, &mut rng).unwrap();
        let report = empirical_rates_check(&counts, &truth);
        assert!(report.max_abs_dev < 0.005, "max dev {}", report.max_abs_dev);
        // and the truth round-trips through the residual computation
        let resid = residuals(&counts, &truth.z, &truth.w, &truth.rho).unwrap();
        let mean_abs = resid.iter().map(|x| x.abs()).sum::<f64>() / resid.len() as f64;
        assert!(mean_abs < 1e-3, "mean residual {mean_abs}");
    }

    #[test]
    fn sim1_block_design() {
        let spec = SimSpec::sim1();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, truth) = generate(&spec, &mut rng).unwrap();
        let ord = CodeOrdering::Flat;
        assert_eq!(truth.z.code(0, 0, ord).get(), 1);
        assert_eq!(truth.z.code(10, 0, ord).get(), 4); // pair 11
        assert_eq!(truth.z.code(29, 0, ord).get(), 4); // pair 30
        assert_eq!(truth.z.code(30, 0, ord).get(), 1); // pair 31
        assert_eq!(truth.z.code(25, 1, ord).get(), 6); // pair 26
        assert_eq!(truth.w.w[0][1], 0.8);
    }

    #[test]
    fn snv_tail_pairs_are_right_missing_only() {
        let spec = SimSpec::snv_embedded();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (counts, truth) = generate(&spec, &mut rng).unwrap();
        for t in 0..spec.t {
            for k in 50..100 {
                for g in 0..6 {
                    assert_eq!(counts.n(t, k, g), 0.0);
                }
                assert!(counts.total(t, k) > 0.0);
            }
            for k in 0..50 {
                let complete: f64 = (0..4).map(|g| counts.n(t, k, g)).sum();
                assert!(complete > 0.0);
            }
        }
        assert_eq!(truth.snv_tail, 50);
    }

    #[test]
    fn tree_preset_generates_feasible_truth() {
        let spec = SimSpec::tree2(50);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (_, truth) = generate(&spec, &mut rng).unwrap();
        let topo = truth.tree.as_ref().unwrap();
        assert_eq!(topo.as_slice(), &[0, 1, 2, 2, 1]);
        let lam = 2.0 * 50.0 / 5.0;
        let lp = crate::tree::log_prior_z_given_tree(&truth.z, topo, lam);
        assert!(lp.is_finite());
        // root column is the normal clone
        for k in 0..50 {
            assert_eq!(truth.z.idx(k, 0), 0);
        }
    }

    #[test]
    fn empirical_missing_rates_recover_generator_setting() {
        // at depth ~500 the per-class empirical rates, averaged over
        // pairs, land within 0.02 of the configured missingness
        let mut spec = SimSpec::sim2();
        spec.v = VSpec::Constant([0.4, 0.3, 0.3]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (counts, _) = generate(&spec, &mut rng).unwrap();
        let rates = crate::likelihood::empirical_missing_rates(&counts).unwrap();
        let mut mean = [0.0f64; 3];
        for t in 0..spec.t {
            for k in 0..spec.k {
                let v = rates.get(t, k);
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x;
                }
            }
        }
        let n = (spec.t * spec.k) as f64;
        for (m, expect) in mean.iter().zip([0.4, 0.3, 0.3]) {
            assert!((m / n - expect).abs() < 0.02, "class mean {} vs {expect}", m / n);
        }
    }

    #[test]
    fn purity_preset_shapes() {
        let spec = SimSpec::purity();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (counts, truth) = generate(&spec, &mut rng).unwrap();
        assert_eq!(counts.n_samples(), 6);
        assert_eq!(truth.w.w[0].len(), 3); // background + 2 subclones
        let stars = truth.w.w_star.as_ref().unwrap();
        assert_eq!(stars.len(), 6);
        truth.w.validate().unwrap();
    }

    #[test]
    fn preset_lookup() {
        for name in SimSpec::PRESETS {
            assert!(SimSpec::preset(name).is_ok(), "{name}");
        }
        assert!(SimSpec::preset("nope").is_err());
    }
}
