//! Reconstruction of tumor subclones from paired-end mutation-pair read
//! counts.
//!
//! The library models the eight observable two-locus read outcomes of a
//! mutation pair as a multinomial mixture over latent subclones. Each
//! subclone carries a two-allele, two-locus genotype per pair (ten canonical
//! values after collapsing indistinguishable allele mirrors), and each sample
//! mixes the subclones with unknown population frequencies. Inference runs
//! parallel-tempered MCMC within a fixed number of subclones and a
//! train/test-split trans-dimensional move across model sizes; an optional
//! tree variant places the subclones on a phylogeny encoded as a parent
//! vector and replaces the independent column prior with a
//! mutation-inheritance prior along the tree.
//!
//! Entry points:
//! - [`simulate`] builds synthetic data sets with known truth,
//! - [`mcmc::fit_flat`] / [`mcmc::fit_tree`] run the samplers,
//! - [`estimate`] turns retained draws into point estimates and tables,
//! - [`diagnostics`] holds the sampler-correctness and convergence checks,
//! - [`io`] reads count tables and writes all output files.

pub mod diagnostics;
pub mod estimate;
mod error;
pub mod genotype;
pub mod io;
pub mod likelihood;
pub mod mcmc;
pub mod priors;
pub mod simulate;
pub mod stats;
pub mod tree;

pub use error::{CoreError, Result};
pub use genotype::{AlleleMatrix, CodeOrdering, GenotypeCode, GenotypeMatrix, ReadOutcome};
pub use likelihood::{MissingRates, NoiseVector, ReadCounts, Weights};
pub use mcmc::{FitResult, ModelVariant, SamplerConfig, SplitData, TemperatureLadder};
pub use priors::{GeomSupport, Hyperparams};
pub use simulate::{SimSpec, TruthBundle};
pub use tree::{TreeHyper, TreeTopology};
