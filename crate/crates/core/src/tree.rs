//! Subclone phylogeny machinery: parent vectors, depths, the depth-penalty
//! tree prior, exhaustive enumeration and uniform sampling of (topology,
//! size), and the mutation-inheritance prior on genotype matrices given a
//! tree.
//!
//! Nodes are numbered 1..=C with node 1 the mutation-free normal clone at
//! the root; node c occupies column c-1 of a [`GenotypeMatrix`]. Along each
//! edge a child keeps all parental mutations and gains a truncated-Poisson
//! number of new ones, at most one per mutation pair, placed uniformly over
//! the parent's unmutated slots.

use crate::genotype::{canonical_index, matrix_at, GenotypeMatrix, NUM_CODES};
use crate::priors::GeomSupport;
use crate::{CoreError, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::fmt;
use std::sync::OnceLock;

/// Largest node count for which the topology space is enumerated.
pub const MAX_ENUM_NODES: usize = 8;

/// A rooted tree over subclones 1..=C encoded as a parent vector;
/// `parent[0] = 0` marks the root.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeTopology {
    parent: Vec<usize>,
}

impl TreeTopology {
    /// Validate and wrap a parent vector (1-based node ids, root first).
    pub fn new(parent: Vec<usize>) -> Result<Self> {
        let c = parent.len();
        if c == 0 {
            return Err(CoreError::InvalidTopology("empty parent vector".into()));
        }
        if parent[0] != 0 {
            return Err(CoreError::InvalidTopology("node 1 must be the root".into()));
        }
        for (i, &p) in parent.iter().enumerate().skip(1) {
            let node = i + 1;
            if p == 0 || p > c || p == node {
                return Err(CoreError::InvalidTopology(format!(
                    "node {node} has invalid parent {p}"
                )));
            }
        }
        let topo = Self { parent };
        if topo.topo_order().len() != c {
            return Err(CoreError::InvalidTopology("not all nodes reachable from the root".into()));
        }
        Ok(topo)
    }

    /// Single-node tree (just the normal clone).
    pub fn root_only() -> Self {
        Self { parent: vec![0] }
    }

    pub fn n_nodes(&self) -> usize {
        self.parent.len()
    }

    /// Parent of a 1-based node id; 0 for the root.
    pub fn parent_of(&self, node: usize) -> usize {
        self.parent[node - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.parent
    }

    /// Depths: generations between each node and the root.
    pub fn depths(&self) -> Vec<usize> {
        let order = self.topo_order();
        let mut eta = vec![0usize; self.n_nodes()];
        for &node in &order {
            if node > 1 {
                eta[node - 1] = eta[self.parent_of(node) - 1] + 1;
            }
        }
        eta
    }

    /// Node ids in an order that visits parents before children. Returns
    /// fewer than C nodes when the vector contains a cycle.
    pub fn topo_order(&self) -> Vec<usize> {
        let c = self.n_nodes();
        let mut order = Vec::with_capacity(c);
        let mut placed = vec![false; c + 1];
        order.push(1);
        placed[1] = true;
        // repeatedly sweep for nodes whose parent is placed; C is small
        loop {
            let before = order.len();
            for node in 2..=c {
                if !placed[node] {
                    let p = self.parent_of(node);
                    if p >= 1 && p <= c && placed[p] {
                        placed[node] = true;
                        order.push(node);
                    }
                }
            }
            if order.len() == before {
                break;
            }
        }
        order
    }

    /// Non-root nodes in topological order paired with their parents.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.topo_order().into_iter().skip(1).map(|n| (self.parent_of(n), n)).collect()
    }
}

impl fmt::Debug for TreeTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T(")?;
        for (i, p) in self.parent.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for TreeTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let strs: Vec<String> = self.parent.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", strs.join(" "))
    }
}

impl std::str::FromStr for TreeTopology {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        let parent: std::result::Result<Vec<usize>, _> =
            s.split_whitespace().map(|x| x.parse::<usize>()).collect();
        let parent = parent
            .map_err(|e| CoreError::InvalidTopology(format!("unparseable parent vector: {e}")))?;
        TreeTopology::new(parent)
    }
}

/// Hyperparameters of the tree variant. `lambda`, `a_p` and `b_p` default
/// to size-dependent values (2K/C, d, and d0 + (C-1)d) when unset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeHyper {
    /// Geometric parameter of the prior on the number of subclones.
    pub alpha: f64,
    /// Depth penalty of the tree prior.
    pub beta: f64,
    /// Mean of the truncated Poisson number of new mutations per edge.
    pub lambda: Option<f64>,
    /// Beta parameters of the normal-clone proportion.
    pub a_p: Option<f64>,
    pub b_p: Option<f64>,
    pub d: f64,
    pub d0: f64,
    pub d1: f64,
    pub geom_support: GeomSupport,
}

impl Default for TreeHyper {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            lambda: None,
            a_p: None,
            b_p: None,
            d: 0.5,
            d0: 0.03,
            d1: 1.0,
            geom_support: GeomSupport::ExponentCMinusOne,
        }
    }
}

impl TreeHyper {
    pub fn lambda_for(&self, k: usize, c: usize) -> f64 {
        self.lambda.unwrap_or(2.0 * k as f64 / c as f64)
    }

    pub fn a_p_for(&self) -> f64 {
        self.a_p.unwrap_or(self.d)
    }

    pub fn b_p_for(&self, c: usize) -> f64 {
        self.b_p.unwrap_or(self.d0 + (c as f64 - 1.0) * self.d)
    }
}

/// Unnormalized log prior of a topology: a penalty on depths.
pub fn log_prior_tree_unnorm(topo: &TreeTopology, beta: f64) -> f64 {
    -beta * topo.depths().iter().map(|&e| (1.0 + e as f64).ln()).sum::<f64>()
}

/// All rooted parent vectors on `c` nodes with node 1 as root. Count is
/// c^(c-2) for c >= 2 (every labeled tree, rooted at 1) and 1 for c = 1.
pub fn enumerate_topologies(c: usize) -> Result<Vec<TreeTopology>> {
    if c == 0 || c > MAX_ENUM_NODES {
        return Err(CoreError::EnumerationTooLarge(c, MAX_ENUM_NODES));
    }
    if c == 1 {
        return Ok(vec![TreeTopology::root_only()]);
    }
    let mut out = Vec::new();
    // digits index the parent choice of nodes 2..=c
    let mut choice = vec![0usize; c - 1];
    loop {
        let mut parent = Vec::with_capacity(c);
        parent.push(0);
        for (i, &d) in choice.iter().enumerate() {
            let node = i + 2;
            // candidate parents in increasing order, skipping the node itself
            let p = if d + 1 < node { d + 1 } else { d + 2 };
            parent.push(p);
        }
        if let Ok(topo) = TreeTopology::new(parent) {
            out.push(topo);
        }
        // odometer over c-1 digits, each with c-1 options
        let mut i = 0;
        loop {
            if i == choice.len() {
                return Ok(out);
            }
            choice[i] += 1;
            if choice[i] < c - 1 {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// The enumerated space of (topology, size) pairs for a size range, with
/// the normalized joint prior (geometric on size, depth-penalty on shape).
#[derive(Clone, Debug)]
pub struct TreeSpace {
    entries: Vec<TreeTopology>,
    log_prior: Vec<f64>,
}

impl TreeSpace {
    pub fn build(
        c_min: usize,
        c_max: usize,
        beta: f64,
        geom_alpha: f64,
        support: GeomSupport,
    ) -> Result<Self> {
        if c_min < 1 || c_min > c_max {
            return Err(CoreError::Config(format!("invalid size range {c_min}..={c_max}")));
        }
        let mut entries = Vec::new();
        let mut log_prior = Vec::new();
        for c in c_min..=c_max {
            let topos = enumerate_topologies(c)?;
            let weights: Vec<f64> =
                topos.iter().map(|t| log_prior_tree_unnorm(t, beta)).collect();
            let log_norm = log_sum_exp(&weights);
            let lp_c = crate::priors::log_prior_c(c, geom_alpha, support);
            for (t, w) in topos.into_iter().zip(weights) {
                entries.push(t);
                log_prior.push(lp_c + w - log_norm);
            }
        }
        Ok(Self { entries, log_prior })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn topology(&self, i: usize) -> &TreeTopology {
        &self.entries[i]
    }

    /// Normalized log p(topology, size); the size normalizer of the
    /// geometric prior is a shared constant and is left in.
    pub fn log_prior(&self, i: usize) -> f64 {
        self.log_prior[i]
    }

    /// Uniform draw over the whole space.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.gen_range(0..self.entries.len())
    }

    pub fn position_of(&self, topo: &TreeTopology) -> Option<usize> {
        self.entries.iter().position(|t| t == topo)
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Uniform draw of (topology, size) over the enumerated range.
pub fn sample_uniform_tree<R: Rng + ?Sized>(
    c_min: usize,
    c_max: usize,
    rng: &mut R,
) -> Result<TreeTopology> {
    let mut all = Vec::new();
    for c in c_min..=c_max {
        all.extend(enumerate_topologies(c)?);
    }
    Ok(all[rng.gen_range(0..all.len())].clone())
}

/// Log pmf of a Poisson(lambda) truncated to [lo, hi].
pub fn trunc_pois_logpmf(m: usize, lambda: f64, lo: usize, hi: usize) -> f64 {
    if m < lo || m > hi || lo > hi {
        return f64::NEG_INFINITY;
    }
    let ln_l = lambda.ln();
    let term = |j: usize| j as f64 * ln_l - ln_gamma(j as f64 + 1.0);
    let terms: Vec<f64> = (lo..=hi).map(term).collect();
    term(m) - log_sum_exp(&terms)
}

fn ln_binom(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Single-edge, single-pair genotype transition probabilities.
///
/// `step_table()[p][c]` is the probability that a pair with parental
/// canonical rank `p` that gains exactly one mutation ends at rank `c`:
/// the number of open slots of the parent's representative whose mutation
/// canonicalizes to `c`, over the total open slots. Mirror symmetry makes
/// the table independent of the representative choice.
pub fn step_table() -> &'static [[f64; NUM_CODES]; NUM_CODES] {
    static TABLE: OnceLock<[[f64; NUM_CODES]; NUM_CODES]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; NUM_CODES]; NUM_CODES];
        for (p, row) in t.iter_mut().enumerate() {
            let rep = matrix_at(p);
            let slots = rep.open_slots();
            for &(j, r) in &slots {
                let child = canonical_index(rep.with_mutation(j, r));
                row[child] += 1.0 / slots.len() as f64;
            }
        }
        t
    })
}

/// Number of unmutated slots of a code's representative (4 - mutation
/// count), the denominator of the uniform slot choice.
pub fn open_slot_count(idx: usize) -> usize {
    4 - matrix_at(idx).mutation_count() as usize
}

/// Draw a genotype matrix from the tree prior: the root column is all
/// reference; every child keeps its parent's mutations and gains a
/// truncated-Poisson number of single-slot additions.
pub fn sample_z_given_tree<R: Rng + ?Sized>(
    topo: &TreeTopology,
    k: usize,
    lambda: f64,
    rng: &mut R,
) -> Result<GenotypeMatrix> {
    let c = topo.n_nodes();
    let mut z = GenotypeMatrix::reference(k, c);
    let table = step_table();
    for (p_node, c_node) in topo.edges() {
        let (p_col, c_col) = (p_node - 1, c_node - 1);
        let open: Vec<usize> =
            (0..k).filter(|&kk| z.idx(kk, p_col) != NUM_CODES - 1).collect();
        if open.is_empty() {
            return Err(CoreError::InvalidTopology(format!(
                "node {p_node} is fully mutated; no child can gain a mutation"
            )));
        }
        // truncated Poisson via inverse cdf over the small support
        let u: f64 = rng.gen();
        let mut m = open.len();
        let mut acc = 0.0;
        for j in 1..=open.len() {
            acc += trunc_pois_logpmf(j, lambda, 1, open.len()).exp();
            if u <= acc {
                m = j;
                break;
            }
        }
        let mut chosen = open.clone();
        chosen.partial_shuffle(rng, m);
        for kk in 0..k {
            z.set_idx(kk, c_col, z.idx(kk, p_col));
        }
        for &kk in chosen.iter().take(m) {
            let parent_idx = z.idx(kk, p_col);
            let row = &table[parent_idx];
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut child = parent_idx;
            for (v, &pr) in row.iter().enumerate() {
                if pr > 0.0 {
                    acc += pr;
                    if u <= acc {
                        child = v;
                        break;
                    }
                    child = v; // fall back to the last reachable value
                }
            }
            z.set_idx(kk, c_col, child);
        }
    }
    Ok(z)
}

/// Exact log prior of a genotype matrix under the tree: per edge, the
/// truncated-Poisson mass of the gain count, the uniform choice of gaining
/// pairs, and the per-pair slot-choice probability (with the multiplicity
/// of slots mapping onto the same canonical child absorbed, so the density
/// sums to one over canonical matrices). Infeasible matrices score -inf.
pub fn log_prior_z_given_tree(z: &GenotypeMatrix, topo: &TreeTopology, lambda: f64) -> f64 {
    let c = topo.n_nodes();
    debug_assert_eq!(z.n_subclones(), c);
    let k = z.n_pairs();
    let table = step_table();
    // root column must be the reference genotype
    for kk in 0..k {
        if z.idx(kk, 0) != 0 {
            return f64::NEG_INFINITY;
        }
    }
    let mut acc = 0.0;
    for (p_node, c_node) in topo.edges() {
        let (p_col, c_col) = (p_node - 1, c_node - 1);
        let mut l_p = 0usize;
        let mut m = 0usize;
        for kk in 0..k {
            let pv = z.idx(kk, p_col);
            let cv = z.idx(kk, c_col);
            if pv != NUM_CODES - 1 {
                l_p += 1;
            }
            if pv != cv {
                let pr = table[pv][cv];
                if pr == 0.0 {
                    return f64::NEG_INFINITY;
                }
                acc += pr.ln();
                m += 1;
            }
        }
        if m < 1 || m > l_p {
            return f64::NEG_INFINITY;
        }
        acc += trunc_pois_logpmf(m, lambda, 1, l_p) - ln_binom(l_p, m);
    }
    acc
}

/// All values of row `k` with positive joint prior given the other rows:
/// the root entry is reference, each edge extends by zero or one mutation,
/// and every edge's gain count stays within its truncated-Poisson support.
pub fn admissible_row_values(z: &GenotypeMatrix, topo: &TreeTopology, k: usize) -> Vec<Vec<u8>> {
    let c = topo.n_nodes();
    let n_pairs = z.n_pairs();
    let table = step_table();
    let edges = topo.edges();
    // per-edge counts excluding pair k
    let mut gains_minus = vec![0usize; edges.len()];
    let mut open_minus = vec![0usize; edges.len()];
    for (e, &(p_node, c_node)) in edges.iter().enumerate() {
        for kk in 0..n_pairs {
            if kk == k {
                continue;
            }
            let pv = z.idx(kk, p_node - 1);
            if pv != NUM_CODES - 1 {
                open_minus[e] += 1;
            }
            if pv != z.idx(kk, c_node - 1) {
                gains_minus[e] += 1;
            }
        }
    }
    // depth-first expansion along the topological order
    let order = topo.topo_order();
    let mut results = Vec::new();
    let mut row = vec![0u8; c];
    fn expand(
        depth: usize,
        order: &[usize],
        topo: &TreeTopology,
        table: &[[f64; NUM_CODES]; NUM_CODES],
        row: &mut Vec<u8>,
        results: &mut Vec<Vec<u8>>,
        edges: &[(usize, usize)],
        gains_minus: &[usize],
        open_minus: &[usize],
    ) {
        if depth == order.len() {
            // validate every edge's gain count against its support
            for (e, &(p_node, c_node)) in edges.iter().enumerate() {
                let pv = row[p_node - 1] as usize;
                let cv = row[c_node - 1] as usize;
                let open = open_minus[e] + usize::from(pv != NUM_CODES - 1);
                let gains = gains_minus[e] + usize::from(pv != cv);
                if gains < 1 || gains > open {
                    return;
                }
            }
            results.push(row.clone());
            return;
        }
        let node = order[depth];
        if node == 1 {
            row[0] = 0;
            expand(depth + 1, order, topo, table, row, results, edges, gains_minus, open_minus);
            return;
        }
        let pv = row[topo.parent_of(node) - 1] as usize;
        row[node - 1] = pv as u8;
        expand(depth + 1, order, topo, table, row, results, edges, gains_minus, open_minus);
        for (v, &pr) in table[pv].iter().enumerate() {
            if pr > 0.0 {
                row[node - 1] = v as u8;
                expand(
                    depth + 1,
                    order,
                    topo,
                    table,
                    row,
                    results,
                    edges,
                    gains_minus,
                    open_minus,
                );
            }
        }
        row[node - 1] = pv as u8;
    }
    expand(0, &order, topo, table, &mut row, &mut results, &edges, &gains_minus, &open_minus);
    results
}
