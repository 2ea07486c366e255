//! Point estimation and posterior summarization: label-aligned genotype
//! distances, minimum-total-distance sample selection for the flat model,
//! MAP selection for the tree model, and posterior tables of the model
//! size (and topology).

use crate::genotype::{matrix_at, CodeOrdering, GenotypeMatrix, NUM_CODES, NUM_OUTCOMES};
use crate::tree::TreeTopology;
use crate::{CoreError, Result};
use rayon::prelude::*;
use std::sync::OnceLock;

/// One retained posterior draw from the cold chain.
#[derive(Clone, Debug)]
pub struct Draw {
    pub c: usize,
    pub z: GenotypeMatrix,
    /// Per sample: background weight first, then the subclone weights.
    pub w: Vec<Vec<f64>>,
    /// Normal-clone weight per sample (purity variant only).
    pub w_star: Option<Vec<f64>>,
    pub rho: [f64; NUM_OUTCOMES],
    pub tree: Option<TreeTopology>,
    /// Full-data log-likelihood kernel of the draw.
    pub log_lik: f64,
    /// Log prior of the continuous parameters and genotypes of the draw.
    pub log_prior_x: f64,
}

/// Retained, thinned, post-burn-in draws plus the code ordering outputs
/// should be written in.
#[derive(Clone, Debug)]
pub struct PosteriorSamples {
    pub draws: Vec<Draw>,
    pub ordering: CodeOrdering,
}

fn bit_distance_table() -> &'static [[u32; NUM_CODES]; NUM_CODES] {
    static TABLE: OnceLock<[[u32; NUM_CODES]; NUM_CODES]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0; NUM_CODES]; NUM_CODES];
        for a in 0..NUM_CODES {
            for b in 0..NUM_CODES {
                let (x, y) = (matrix_at(a).bits(), matrix_at(b).bits());
                t[a][b] = x.iter().zip(&y).map(|(&p, &q)| p.abs_diff(q) as u32).sum();
            }
        }
        t
    })
}

/// L1 distance between column `c` of `z` and column `c_other` of `other`,
/// summing entrywise over the vectorized canonical representatives.
pub fn column_distance(z: &GenotypeMatrix, other: &GenotypeMatrix, c: usize, c_other: usize) -> u32 {
    debug_assert_eq!(z.n_pairs(), other.n_pairs());
    let table = bit_distance_table();
    (0..z.n_pairs()).map(|k| table[z.idx(k, c)][other.idx(k, c_other)]).sum()
}

/// Minimum-cost assignment (Hungarian algorithm with potentials) on a
/// square row-major cost matrix; returns the optimal row-to-column map.
pub(crate) fn min_cost_assignment(cost: &[i64], n: usize) -> Vec<usize> {
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut assigned_row = vec![0usize; n + 1]; // per column, 1-based rows
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if assigned_row[j] > 0 {
            assign[assigned_row[j] - 1] = j - 1;
        }
    }
    assign
}

fn exhaustive_assignment(cost: &[i64], n: usize) -> (i64, Vec<usize>) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = i64::MAX;
    let mut best_perm = perm.clone();
    // Heap's algorithm over all permutations
    fn heap(k: usize, perm: &mut Vec<usize>, cost: &[i64], n: usize, best: &mut i64, best_perm: &mut Vec<usize>) {
        if k == 1 {
            let total: i64 = perm.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
            if total < *best {
                *best = total;
                *best_perm = perm.clone();
            }
            return;
        }
        for i in 0..k {
            heap(k - 1, perm, cost, n, best, best_perm);
            if k % 2 == 0 {
                perm.swap(i, k - 1);
            } else {
                perm.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut perm, cost, n, &mut best, &mut best_perm);
    (best, best_perm)
}

/// Minimum over column permutations of the summed column distances, and
/// the minimizing permutation (new column c of `other` aligns with column
/// `perm[c]` of `z`... the permutation maps columns of `z` onto columns of
/// `other`). Exhaustive search for small matrices, assignment solver
/// beyond; both routes agree exactly.
pub fn z_distance_with_perm(z: &GenotypeMatrix, other: &GenotypeMatrix) -> Result<(u32, Vec<usize>)> {
    if z.n_pairs() != other.n_pairs() || z.n_subclones() != other.n_subclones() {
        return Err(CoreError::Dimension(format!(
            "cannot compare {}x{} against {}x{}",
            z.n_pairs(),
            z.n_subclones(),
            other.n_pairs(),
            other.n_subclones()
        )));
    }
    let c = z.n_subclones();
    let mut cost = vec![0i64; c * c];
    for a in 0..c {
        for b in 0..c {
            cost[a * c + b] = i64::from(column_distance(z, other, a, b));
        }
    }
    let assign = if c <= 6 {
        exhaustive_assignment(&cost, c).1
    } else {
        min_cost_assignment(&cost, c)
    };
    let total: i64 = assign.iter().enumerate().map(|(i, &j)| cost[i * c + j]).sum();
    Ok((total as u32, assign))
}

/// Label-invariant distance between two genotype matrices.
pub fn z_distance(z: &GenotypeMatrix, other: &GenotypeMatrix) -> Result<u32> {
    z_distance_with_perm(z, other).map(|(d, _)| d)
}

/// Index of the draw minimizing the total pairwise distance to all other
/// draws of the same size; the spread of large sample sets is capped by
/// deterministic even-stride subsampling. Ties go to the lowest index.
pub fn select_point_estimate(
    samples: &PosteriorSamples,
    c_hat: usize,
    cap: usize,
) -> Result<(usize, Draw)> {
    let idx: Vec<usize> =
        (0..samples.draws.len()).filter(|&i| samples.draws[i].c == c_hat).collect();
    if idx.is_empty() {
        return Err(CoreError::NoMatchingSamples);
    }
    let capped: Vec<usize> = if idx.len() > cap {
        let stride = idx.len() as f64 / cap as f64;
        (0..cap).map(|i| idx[(i as f64 * stride) as usize]).collect()
    } else {
        idx
    };
    let n = capped.len();
    // symmetric pairwise distances, reduced in parallel per row
    let totals: Vec<u64> = capped
        .par_iter()
        .map(|&i| {
            let zi = &samples.draws[i].z;
            capped
                .iter()
                .map(|&j| {
                    if i == j {
                        0u64
                    } else {
                        u64::from(z_distance(zi, &samples.draws[j].z).expect("same shape"))
                    }
                })
                .sum()
        })
        .collect();
    let mut best = 0usize;
    for i in 1..n {
        if totals[i] < totals[best] {
            best = i;
        }
    }
    let l_hat = capped[best];
    Ok((l_hat, samples.draws[l_hat].clone()))
}

/// MAP draw among those matching the modal size and topology: maximizes
/// log-likelihood plus log prior of the draw. Ties go to the lowest index.
pub fn map_estimate(
    samples: &PosteriorSamples,
    c_hat: usize,
    tree_hat: &TreeTopology,
) -> Result<(usize, Draw)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in samples.draws.iter().enumerate() {
        if d.c != c_hat || d.tree.as_ref() != Some(tree_hat) {
            continue;
        }
        let score = d.log_lik + d.log_prior_x;
        match best {
            Some((_, s)) if score <= s => {}
            _ => best = Some((i, score)),
        }
    }
    let (i, _) = best.ok_or(CoreError::NoMatchingSamples)?;
    Ok((i, samples.draws[i].clone()))
}

/// Relative frequency of each model size among the draws, ascending in C,
/// plus the modal size (smallest on ties).
pub fn posterior_of_c(samples: &PosteriorSamples) -> (Vec<(usize, f64)>, usize) {
    let n = samples.draws.len() as f64;
    let mut counts: std::collections::BTreeMap<usize, usize> = Default::default();
    for d in &samples.draws {
        *counts.entry(d.c).or_insert(0) += 1;
    }
    let table: Vec<(usize, f64)> =
        counts.iter().map(|(&c, &cnt)| (c, cnt as f64 / n)).collect();
    let mode = table
        .iter()
        .fold((0usize, -1.0), |acc, &(c, p)| if p > acc.1 { (c, p) } else { acc })
        .0;
    (table, mode)
}

/// Relative frequency of each (topology, size) pair, ordered by size then
/// parent vector, plus the modal entry.
pub fn posterior_of_tree(
    samples: &PosteriorSamples,
) -> (Vec<(TreeTopology, f64)>, Option<TreeTopology>) {
    let n = samples.draws.len() as f64;
    let mut counts: std::collections::BTreeMap<Vec<usize>, usize> = Default::default();
    for d in &samples.draws {
        if let Some(t) = &d.tree {
            *counts.entry(t.as_slice().to_vec()).or_insert(0) += 1;
        }
    }
    let mut table: Vec<(TreeTopology, f64)> = counts
        .iter()
        .map(|(pv, &cnt)| (TreeTopology::new(pv.clone()).expect("stored topology"), cnt as f64 / n))
        .collect();
    table.sort_by_key(|(t, _)| (t.n_nodes(), t.as_slice().to_vec()));
    let mode = table
        .iter()
        .fold((None, -1.0f64), |acc, (t, p)| if *p > acc.1 { (Some(t.clone()), *p) } else { acc })
        .0;
    (table, mode)
}
