//! The run manifest records everything needed to reproduce a run
//! byte-for-byte: resolved sampler configuration, hyperparameters, seed,
//! crate version, and the genotype-code ordering of every output file.

use anyhow::Context;
use paircall::genotype::CodeOrdering;
use paircall::mcmc::{FitResult, ModelVariant, SamplerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::BufRead;
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSection {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub variant: String,
    pub code_ordering: String,
    pub train_frac: f64,
    pub estimate_cap: usize,
    pub summary: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    run: RunSection,
    sampler: toml::Value,
    hyper: toml::Value,
}

pub fn write_manifest(
    out_dir: &Path,
    result: &FitResult,
    cfg: &SamplerConfig,
    hyper_toml: &str,
    summary: &str,
) -> anyhow::Result<()> {
    let sampler = toml::Value::try_from(cfg)?;
    let hyper: toml::Value = toml::from_str(hyper_toml)?;
    let mut hasher = Sha256::new();
    hasher.update(toml::to_string(&sampler)?.as_bytes());
    hasher.update(hyper_toml.as_bytes());
    let hash = format!("sha256:{:x}", hasher.finalize());
    let manifest = Manifest {
        run: RunSection {
            command: match result.variant {
                ModelVariant::Tree => "fit-tree".into(),
                _ => "fit".into(),
            },
            version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.seed,
            config_hash: hash,
            variant: result.variant.name().into(),
            code_ordering: result.samples.ordering.name().into(),
            train_frac: result.b,
            estimate_cap: cfg.estimate_cap,
            summary: summary.replace('\n', "; "),
        },
        sampler,
        hyper,
    };
    std::fs::write(out_dir.join("run_manifest.toml"), toml::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_manifest(out_dir: &Path) -> anyhow::Result<RunSection> {
    let path = out_dir.join("run_manifest.toml");
    let body = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let manifest: Manifest = toml::from_str(&body)?;
    Ok(manifest.run)
}

#[derive(Debug, Serialize, Deserialize)]
struct SimManifest {
    command: String,
    version: String,
    preset: String,
    seed: u64,
    code_ordering: String,
}

pub fn write_sim_manifest(
    out_dir: &Path,
    preset: &str,
    seed: u64,
    ordering: CodeOrdering,
) -> anyhow::Result<()> {
    let manifest = SimManifest {
        command: "simulate".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        preset: preset.into(),
        seed,
        code_ordering: ordering.name().into(),
    };
    std::fs::write(out_dir.join("run_manifest.toml"), toml::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Read back the id index written next to fit outputs.
pub fn read_index(out_dir: &Path) -> anyhow::Result<(Vec<String>, Vec<String>, usize)> {
    let path = out_dir.join("index.csv");
    let file = std::fs::File::open(&path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut samples = Vec::new();
    let mut pairs = Vec::new();
    let mut n_mutation_pairs = 0usize;
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        anyhow::ensure!(fields.len() == 3, "{}:{}: malformed index row", path.display(), i + 1);
        match fields[0] {
            "sample" => samples.push(fields[1].to_string()),
            "pair" => {
                pairs.push(fields[1].to_string());
                n_mutation_pairs += 1;
            }
            "snv" => pairs.push(fields[1].to_string()),
            other => anyhow::bail!("{}:{}: unknown index kind '{other}'", path.display(), i + 1),
        }
    }
    Ok((samples, pairs, n_mutation_pairs))
}
