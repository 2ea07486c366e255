//! Mutation-pair genotype algebra.
//!
//! A subclone's genotype at one mutation pair is a 2x2 binary matrix: two
//! alleles (rows) by two loci (columns), a set bit marking a somatic
//! mutation. Reads cannot phase across distinct pairs, so the two allele
//! rows are interchangeable: the 16 raw matrices collapse onto 10 canonical
//! codes. This module owns that collapse, the two published orderings of
//! the 10-code list, the 8 read outcomes, and the probability that a read
//! outcome matches a genotype.

use crate::{CoreError, Result};
use std::fmt;

/// One 2x2 binary genotype: alleles indexed by `j`, loci by `r`.
///
/// Internally each allele is a 2-bit number with locus 1 in the high bit,
/// so `(01,10)` stores alleles `[0b01, 0b10]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlleleMatrix {
    alleles: [u8; 2],
}

impl AlleleMatrix {
    /// Build from the four binary entries `z[j][r]`.
    pub fn new(z: [[u8; 2]; 2]) -> Result<Self> {
        for row in &z {
            for &b in row {
                if b > 1 {
                    return Err(CoreError::InvalidAllele(b));
                }
            }
        }
        Ok(Self::from_alleles(z[0][0] * 2 + z[0][1], z[1][0] * 2 + z[1][1]))
    }

    pub(crate) fn from_alleles(a1: u8, a2: u8) -> Self {
        debug_assert!(a1 < 4 && a2 < 4);
        Self { alleles: [a1, a2] }
    }

    /// Entry `z[j][r]`, both indices 0-based.
    pub fn bit(&self, j: usize, r: usize) -> u8 {
        (self.alleles[j] >> (1 - r)) & 1
    }

    /// Swap the two allele rows.
    pub fn mirror(&self) -> Self {
        Self { alleles: [self.alleles[1], self.alleles[0]] }
    }

    /// The lexicographically smaller of the matrix and its mirror, rows
    /// read as 2-bit numbers.
    pub fn canonical(&self) -> Self {
        let [a, b] = self.alleles;
        Self { alleles: [a.min(b), a.max(b)] }
    }

    pub fn is_canonical(&self) -> bool {
        self.alleles[0] <= self.alleles[1]
    }

    /// Number of mutated (set) entries.
    pub fn mutation_count(&self) -> u32 {
        (self.alleles[0].count_ones() + self.alleles[1].count_ones()) as u32
    }

    /// Unmutated `(j, r)` slots, in row-major order.
    pub fn open_slots(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(4);
        for j in 0..2 {
            for r in 0..2 {
                if self.bit(j, r) == 0 {
                    out.push((j, r));
                }
            }
        }
        out
    }

    /// Copy with entry `(j, r)` set to 1.
    pub fn with_mutation(&self, j: usize, r: usize) -> Self {
        let mut alleles = self.alleles;
        alleles[j] |= 1 << (1 - r);
        Self { alleles }
    }

    /// The entries as a flat vector `(z11, z12, z21, z22)`.
    pub fn bits(&self) -> [u8; 4] {
        [self.bit(0, 0), self.bit(0, 1), self.bit(1, 0), self.bit(1, 1)]
    }

    /// All 16 raw matrices.
    pub fn all() -> impl Iterator<Item = AlleleMatrix> {
        (0u8..4).flat_map(|a| (0u8..4).map(move |b| AlleleMatrix::from_alleles(a, b)))
    }
}

impl fmt::Debug for AlleleMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}{},{}{})",
            self.bit(0, 0),
            self.bit(0, 1),
            self.bit(1, 0),
            self.bit(1, 1)
        )
    }
}

/// Number of canonical genotype codes.
pub const NUM_CODES: usize = 10;
/// Number of read outcomes.
pub const NUM_OUTCOMES: usize = 8;

// Canonical representatives in lexicographic order of (min allele, max
// allele). This order coincides with the flat-model listing of the codes;
// the tree-model listing swaps entries 7 and 8.
const CANON_REPS: [[u8; 2]; NUM_CODES] = [
    [0, 0], // (00,00)
    [0, 1], // (00,01)
    [0, 2], // (00,10)
    [0, 3], // (00,11)
    [1, 1], // (01,01)
    [1, 2], // (01,10)
    [1, 3], // (01,11)
    [2, 2], // (10,10)
    [2, 3], // (10,11)
    [3, 3], // (11,11)
];

/// Rank of a matrix's canonical form in the lexicographic list, 0-based.
pub fn canonical_index(m: AlleleMatrix) -> usize {
    const OFFSET: [usize; 4] = [0, 4, 7, 9];
    let c = m.canonical();
    OFFSET[c.alleles[0] as usize] + (c.alleles[1] - c.alleles[0]) as usize
}

/// Canonical representative for a 0-based lexicographic rank.
pub fn matrix_at(idx: usize) -> AlleleMatrix {
    let [a, b] = CANON_REPS[idx];
    AlleleMatrix::from_alleles(a, b)
}

/// A genotype code `q` in 1..=10 under one of the two published orderings.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct GenotypeCode(u8);

impl GenotypeCode {
    pub fn new(q: u8) -> Result<Self> {
        if (1..=NUM_CODES as u8).contains(&q) {
            Ok(Self(q))
        } else {
            Err(CoreError::InvalidCode(q))
        }
    }

    pub fn get(&self) -> u8 {
        self.0
    }
}

/// The two orderings of the 10-code list.
///
/// The flat model lists codes in lexicographic order of the canonical
/// representatives; the tree model swaps codes 7 and 8, putting `(10,10)`
/// at 7 and `(01,11)` at 8. The engine stores lexicographic ranks
/// internally and converts at the boundary, so every output names its
/// ordering explicitly.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CodeOrdering {
    Flat,
    Tree,
}

impl CodeOrdering {
    /// Map a 0-based lexicographic rank to the code in this ordering.
    pub fn code_of_index(&self, idx: usize) -> GenotypeCode {
        debug_assert!(idx < NUM_CODES);
        let q = match self {
            CodeOrdering::Flat => idx + 1,
            CodeOrdering::Tree => match idx {
                6 => 8, // (01,11)
                7 => 7, // (10,10)
                i => i + 1,
            },
        };
        GenotypeCode(q as u8)
    }

    /// Map a code in this ordering to its 0-based lexicographic rank.
    pub fn index_of_code(&self, code: GenotypeCode) -> usize {
        let q = code.0 as usize;
        match self {
            CodeOrdering::Flat => q - 1,
            CodeOrdering::Tree => match q {
                7 => 7, // (10,10)
                8 => 6, // (01,11)
                _ => q - 1,
            },
        }
    }

    /// Collapse a raw matrix onto its code.
    pub fn canonicalize(&self, m: AlleleMatrix) -> GenotypeCode {
        self.code_of_index(canonical_index(m))
    }

    /// Canonical representative matrix of a code.
    pub fn representative(&self, code: GenotypeCode) -> AlleleMatrix {
        matrix_at(self.index_of_code(code))
    }

    pub fn name(&self) -> &'static str {
        match self {
            CodeOrdering::Flat => "flat",
            CodeOrdering::Tree => "tree",
        }
    }
}

/// Missingness class of a read outcome.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OutcomeClass {
    /// Covers both loci (g = 1..4).
    Complete,
    /// Covers only locus 2 (g = 5, 6).
    LeftMissing,
    /// Covers only locus 1 (g = 7, 8).
    RightMissing,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 3] =
        [OutcomeClass::Complete, OutcomeClass::LeftMissing, OutcomeClass::RightMissing];

    /// Outcome indices (0-based) belonging to this class.
    pub fn outcome_range(&self) -> std::ops::Range<usize> {
        match self {
            OutcomeClass::Complete => 0..4,
            OutcomeClass::LeftMissing => 4..6,
            OutcomeClass::RightMissing => 6..8,
        }
    }

    pub fn index(&self) -> usize {
        match self {
            OutcomeClass::Complete => 0,
            OutcomeClass::LeftMissing => 1,
            OutcomeClass::RightMissing => 2,
        }
    }
}

/// One of the 8 observable two-locus read outcomes
/// `{00, 01, 10, 11, -0, -1, 0-, 1-}`, `-` marking an uncovered locus.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ReadOutcome {
    RefRef,
    RefVar,
    VarRef,
    VarVar,
    MissRef,
    MissVar,
    RefMiss,
    VarMiss,
}

impl ReadOutcome {
    pub const ALL: [ReadOutcome; NUM_OUTCOMES] = [
        ReadOutcome::RefRef,
        ReadOutcome::RefVar,
        ReadOutcome::VarRef,
        ReadOutcome::VarVar,
        ReadOutcome::MissRef,
        ReadOutcome::MissVar,
        ReadOutcome::RefMiss,
        ReadOutcome::VarMiss,
    ];

    /// Column labels used in count tables, `m` standing for `-`.
    pub const LABELS: [&'static str; NUM_OUTCOMES] =
        ["n00", "n01", "n10", "n11", "nm0", "nm1", "n0m", "n1m"];

    /// 0-based position (g - 1).
    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn from_index(g: usize) -> Self {
        Self::ALL[g]
    }

    pub fn class(&self) -> OutcomeClass {
        match self.index() {
            0..=3 => OutcomeClass::Complete,
            4 | 5 => OutcomeClass::LeftMissing,
            _ => OutcomeClass::RightMissing,
        }
    }
}

/// Probability that a read with outcome `g` arises from genotype `m`:
/// each allele is chosen with probability 1/2 and must agree with the read
/// on every covered locus. Always one of {0, 0.5, 1} and invariant under
/// allele mirroring.
pub fn match_prob(g: ReadOutcome, m: &AlleleMatrix) -> f64 {
    let mut hits = 0u32;
    for j in 0..2 {
        let a = m.alleles[j];
        let ok = match g {
            ReadOutcome::RefRef => a == 0b00,
            ReadOutcome::RefVar => a == 0b01,
            ReadOutcome::VarRef => a == 0b10,
            ReadOutcome::VarVar => a == 0b11,
            ReadOutcome::MissRef => a & 1 == 0,
            ReadOutcome::MissVar => a & 1 == 1,
            ReadOutcome::RefMiss => a >> 1 == 0,
            ReadOutcome::VarMiss => a >> 1 == 1,
        };
        hits += ok as u32;
    }
    0.5 * f64::from(hits)
}

static MATCH_TABLE: std::sync::OnceLock<[[f64; NUM_OUTCOMES]; NUM_CODES]> =
    std::sync::OnceLock::new();

/// Match probabilities indexed by `[canonical rank][outcome index]`.
pub fn match_table() -> &'static [[f64; NUM_OUTCOMES]; NUM_CODES] {
    MATCH_TABLE.get_or_init(|| {
        let mut t = [[0.0; NUM_OUTCOMES]; NUM_CODES];
        for (idx, row) in t.iter_mut().enumerate() {
            let m = matrix_at(idx);
            for g in ReadOutcome::ALL {
                row[g.index()] = match_prob(g, &m);
            }
        }
        t
    })
}

/// K x C matrix of genotypes, stored as canonical lexicographic ranks.
#[derive(Clone, PartialEq, Eq)]
pub struct GenotypeMatrix {
    k: usize,
    c: usize,
    idx: Vec<u8>, // row-major, k * c entries, each < 10
}

impl GenotypeMatrix {
    /// All entries set to the reference genotype.
    pub fn reference(k: usize, c: usize) -> Self {
        Self { k, c, idx: vec![0; k * c] }
    }

    pub fn from_indices(k: usize, c: usize, idx: Vec<u8>) -> Result<Self> {
        if idx.len() != k * c {
            return Err(CoreError::Dimension(format!(
                "genotype matrix needs {} entries, got {}",
                k * c,
                idx.len()
            )));
        }
        if let Some(&bad) = idx.iter().find(|&&v| v >= NUM_CODES as u8) {
            return Err(CoreError::InvalidCode(bad + 1));
        }
        Ok(Self { k, c, idx })
    }

    pub fn n_pairs(&self) -> usize {
        self.k
    }

    pub fn n_subclones(&self) -> usize {
        self.c
    }

    /// Canonical rank at (pair, subclone), 0-based.
    pub fn idx(&self, k: usize, c: usize) -> usize {
        self.idx[k * self.c + c] as usize
    }

    pub fn set_idx(&mut self, k: usize, c: usize, idx: usize) {
        debug_assert!(idx < NUM_CODES);
        self.idx[k * self.c + c] = idx as u8;
    }

    pub fn code(&self, k: usize, c: usize, ord: CodeOrdering) -> GenotypeCode {
        ord.code_of_index(self.idx(k, c))
    }

    pub fn set_code(&mut self, k: usize, c: usize, code: GenotypeCode, ord: CodeOrdering) {
        self.set_idx(k, c, ord.index_of_code(code));
    }

    pub fn row(&self, k: usize) -> &[u8] {
        &self.idx[k * self.c..(k + 1) * self.c]
    }

    pub fn set_row(&mut self, k: usize, row: &[u8]) {
        debug_assert_eq!(row.len(), self.c);
        self.idx[k * self.c..(k + 1) * self.c].copy_from_slice(row);
    }

    /// Copy with columns reordered so new column `c` is old `perm[c]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.c);
        let mut out = Self::reference(self.k, self.c);
        for k in 0..self.k {
            for (c_new, &c_old) in perm.iter().enumerate() {
                out.set_idx(k, c_new, self.idx(k, c_old));
            }
        }
        out
    }

    pub fn raw(&self) -> &[u8] {
        &self.idx
    }
}

impl fmt::Debug for GenotypeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "GenotypeMatrix {}x{}", self.k, self.c)?;
        for k in 0..self.k {
            for c in 0..self.c {
                write!(f, "{:3}", self.idx(k, c) + 1)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
