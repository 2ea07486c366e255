//! Batch front door: data ingestion, configuration, the fit / fit-tree /
//! simulate / geweke / summarize subcommands, and all output files.

mod config;
mod manifest;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use config::{override_warn, FileConfig};
use paircall::diagnostics::{geweke_joint, GewekeConfig, KernelMutation};
use paircall::estimate::{
    map_estimate, posterior_of_c, posterior_of_tree, select_point_estimate, PosteriorSamples,
};
use paircall::genotype::CodeOrdering;
use paircall::io as pio;
use paircall::likelihood::residuals;
use paircall::mcmc::{fit_flat, fit_tree, FitResult, ModelVariant};
use paircall::simulate::{empirical_rates_check, generate, SimSpec};
use paircall::{CoreError, Hyperparams, NoiseVector, SamplerConfig, TreeHyper, Weights};
use rand::SeedableRng;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "paircall", version, about = "Tumor subclone reconstruction from mutation-pair read counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the flat mixture model.
    Fit(FitArgs),
    /// Fit the tree-structured model.
    FitTree(FitArgs),
    /// Generate a synthetic data set from a named preset.
    Simulate(SimArgs),
    /// Run the sampler-correctness joint test.
    Geweke(GewekeArgs),
    /// Recompute summaries of a finished run without re-sampling.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Mutation-pair count table (TSV).
    #[arg(long)]
    counts: PathBuf,
    /// Optional marginal-SNV table (TSV), embedded as extra pairs.
    #[arg(long)]
    snv: Option<PathBuf>,
    /// Flat key-value configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    cmin: Option<usize>,
    #[arg(long)]
    cmax: Option<usize>,
    /// Training fraction of the data split (overrides --test-target).
    #[arg(long, conflicts_with = "test_target")]
    train_frac: Option<f64>,
    /// Desired test-split read mass.
    #[arg(long)]
    test_target: Option<f64>,
    /// Model an explicit mutation-free normal clone (flat model only).
    #[arg(long)]
    purity: bool,
}

#[derive(Args)]
struct SimArgs {
    /// Preset name; see `simulate --list`.
    #[arg(long, required_unless_present = "list")]
    preset: Option<String>,
    #[arg(long, default_value_t = 1234)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// List the available presets and exit.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct GewekeArgs {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 200_000)]
    cycles: usize,
    #[arg(long, default_value_t = 4242)]
    seed: u64,
    /// Run the deliberately broken kernel (drops the proposal Jacobian)
    /// to demonstrate the test's sensitivity.
    #[arg(long)]
    mutate_theta_jacobian: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Directory holding a finished run (samples.csv + run_manifest.toml).
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => run_fit(args, false),
        Command::FitTree(args) => run_fit(args, true),
        Command::Simulate(args) => run_simulate(args),
        Command::Geweke(args) => run_geweke(args),
        Command::Summarize(args) => run_summarize(args),
    };
    match result {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(classify_exit(&err));
        }
    }
}

/// 2 usage, 3 data error, 4 runtime failure.
fn classify_exit(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::DataFormat { .. }
                | CoreError::SnvCounts { .. }
                | CoreError::ZeroCoverage { .. }
                | CoreError::InvalidCode(_)
                | CoreError::InvalidAllele(_)
                | CoreError::Dimension(_)
                | CoreError::Io(_) => 3,
                CoreError::Config(_) => 2,
                _ => 4,
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    4
}

fn load_table(counts: &Path, snv: Option<&Path>) -> anyhow::Result<pio::CountsTable> {
    let mut table = pio::parse_counts(counts)
        .with_context(|| format!("reading counts from {}", counts.display()))?;
    if let Some(snv) = snv {
        let records = pio::parse_snv(snv)
            .with_context(|| format!("reading SNVs from {}", snv.display()))?;
        pio::append_snvs(&mut table, &records)?;
    }
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    Ok(table)
}

fn run_fit(args: FitArgs, tree: bool) -> anyhow::Result<()> {
    let file_cfg = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut cfg = if tree { SamplerConfig::default_tree() } else { SamplerConfig::default() };
    file_cfg.apply_sampler(&mut cfg)?;
    override_warn("seed", file_cfg.seed, args.seed, &mut cfg.seed);
    override_warn("iters", file_cfg.iters, args.iters, &mut cfg.iters);
    override_warn("burnin", file_cfg.burnin, args.burnin, &mut cfg.burnin);
    override_warn("thin", file_cfg.thin, args.thin, &mut cfg.thin);
    override_warn("cmin", file_cfg.cmin, args.cmin, &mut cfg.c_min);
    override_warn("cmax", file_cfg.cmax, args.cmax, &mut cfg.c_max);
    if let Some(b) = args.train_frac {
        if let Some(f) = file_cfg.train_frac {
            if f != b {
                eprintln!("warning: --train-frac {b} overrides config value {f}");
            }
        }
        cfg.train_frac = Some(b);
    }
    override_warn("test-target", file_cfg.test_target, args.test_target, &mut cfg.test_target);

    let purity = args.purity || file_cfg.purity.unwrap_or(false);
    if tree && purity {
        bail!("--purity applies to the flat model; the tree model already carries a normal clone");
    }
    cfg.variant = if tree {
        ModelVariant::Tree
    } else if purity {
        ModelVariant::FlatPurity
    } else {
        ModelVariant::Flat
    };

    let table = load_table(&args.counts, args.snv.as_deref())?;
    std::fs::create_dir_all(&args.out_dir)?;

    let (result, hyper_toml) = if tree {
        let mut hyper = TreeHyper::default();
        file_cfg.apply_tree_hyper(&mut hyper)?;
        let res = fit_tree(&table.counts, &hyper, &cfg)?;
        (res, toml::to_string(&hyper)?)
    } else {
        let mut hyper = Hyperparams::default();
        file_cfg.apply_flat_hyper(&mut hyper)?;
        let res = fit_flat(&table.counts, &hyper, &cfg)?;
        (res, toml::to_string(&hyper)?)
    };

    write_fit_outputs(&args.out_dir, &table, &result, &cfg, &hyper_toml)?;
    Ok(())
}

fn write_fit_outputs(
    out_dir: &Path,
    table: &pio::CountsTable,
    result: &FitResult,
    cfg: &SamplerConfig,
    hyper_toml: &str,
) -> anyhow::Result<()> {
    let samples = &result.samples;
    pio::write_samples(&out_dir.join("samples.csv"), samples)?;
    pio::write_telemetry(&out_dir.join("telemetry.csv"), &result.telemetry)?;
    pio::write_acceptance(&out_dir.join("acceptance.csv"), &result.telemetry)?;
    pio::write_index(
        &out_dir.join("index.csv"),
        &table.sample_ids,
        &table.pair_ids,
        table.n_mutation_pairs,
    )?;
    // the ingested (merged) table, so summaries can recompute residuals
    pio::write_counts_tsv(
        &out_dir.join("counts_used.tsv"),
        &table.counts,
        &table.sample_ids,
        &table.pair_ids,
        None,
    )?;
    let summary = write_estimates(out_dir, samples, cfg.estimate_cap, table)?;
    manifest::write_manifest(out_dir, result, cfg, hyper_toml, &summary)?;
    println!("{summary}");
    Ok(())
}

/// Write point-estimate and posterior-table files; returns a short
/// human-readable summary.
fn write_estimates(
    out_dir: &Path,
    samples: &PosteriorSamples,
    cap: usize,
    table: &pio::CountsTable,
) -> anyhow::Result<String> {
    let (c_table, c_hat) = posterior_of_c(samples);
    pio::write_c_posterior(&out_dir.join("c_posterior.csv"), &c_table)?;
    let mut summary = String::new();
    let draw = if samples.ordering == CodeOrdering::Tree {
        let (tree_table, t_hat) = posterior_of_tree(samples);
        pio::write_tree_posterior(&out_dir.join("tree_posterior.csv"), &tree_table)?;
        let t_hat = t_hat.context("no tree draws recorded")?;
        let c_hat = t_hat.n_nodes();
        let (_, draw) = map_estimate(samples, c_hat, &t_hat)?;
        summary.push_str(&format!(
            "posterior mode: C = {c_hat}, parent vector = {t_hat}\n"
        ));
        draw
    } else {
        let (_, draw) = select_point_estimate(samples, c_hat, cap)?;
        summary.push_str(&format!("posterior mode: C = {c_hat}\n"));
        draw
    };
    pio::write_genotypes(
        &out_dir.join("z_hat.csv"),
        &draw.z,
        &table.pair_ids,
        samples.ordering,
    )?;
    pio::write_weights(
        &out_dir.join("w_hat.csv"),
        &draw.w,
        draw.w_star.as_deref(),
        &table.sample_ids,
    )?;
    pio::write_rho(&out_dir.join("rho_hat.csv"), &draw.rho)?;

    // realized residuals of the point estimate against the data
    let weights = match &draw.w_star {
        Some(ws) => Weights::with_star(draw.w.clone(), ws.clone()),
        None => Weights::new(draw.w.clone()),
    };
    let resid = residuals(&table.counts, &draw.z, &weights, &NoiseVector(draw.rho))?;
    let mut f = std::fs::File::create(out_dir.join("residuals.csv"))?;
    use std::io::Write;
    writeln!(f, "sample,pair,outcome,residual")?;
    let k_n = table.counts.n_pairs();
    for (i, r) in resid.iter().enumerate() {
        let g = i % 8;
        let k = (i / 8) % k_n;
        let t = i / 8 / k_n;
        writeln!(f, "{},{},{},{}", table.sample_ids[t], table.pair_ids[k], g + 1, r)?;
    }
    let mean_abs = resid.iter().map(|x| x.abs()).sum::<f64>() / resid.len() as f64;
    summary.push_str(&format!("mean absolute residual: {mean_abs:.5}\n"));
    summary.push_str(&format!("retained draws: {}", samples.draws.len()));
    Ok(summary)
}

fn run_simulate(args: SimArgs) -> anyhow::Result<()> {
    if args.list {
        for name in SimSpec::PRESETS {
            println!("{name}");
        }
        return Ok(());
    }
    let name = args.preset.as_deref().unwrap();
    let spec = SimSpec::preset(name)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let (counts, truth) = generate(&spec, &mut rng)?;
    std::fs::create_dir_all(&args.out_dir)?;

    let sample_ids: Vec<String> = (1..=spec.t).map(|t| format!("s{t}")).collect();
    let pair_ids: Vec<String> = (0..spec.k)
        .map(|k| {
            if k < spec.k - spec.snv_tail {
                format!("p{}", k + 1)
            } else {
                format!("v{}", k + 1 - (spec.k - spec.snv_tail))
            }
        })
        .collect();
    let n_pairs = spec.k - spec.snv_tail;
    pio::write_counts_tsv(
        &args.out_dir.join("counts.tsv"),
        &counts,
        &sample_ids,
        &pair_ids,
        Some(n_pairs),
    )?;
    if spec.snv_tail > 0 {
        pio::write_snv_tsv(
            &args.out_dir.join("snv.tsv"),
            &counts,
            &sample_ids,
            &pair_ids,
            n_pairs,
        )?;
    }
    let ordering = if truth.tree.is_some() { CodeOrdering::Tree } else { CodeOrdering::Flat };
    pio::write_genotypes(&args.out_dir.join("z_true.csv"), &truth.z, &pair_ids, ordering)?;
    pio::write_weights(
        &args.out_dir.join("w_true.csv"),
        &truth.w.w,
        truth.w.w_star.as_deref(),
        &sample_ids,
    )?;
    pio::write_rho(&args.out_dir.join("rho_true.csv"), &truth.rho.0)?;
    if let Some(tree) = &truth.tree {
        std::fs::write(args.out_dir.join("tree_true.txt"), format!("{tree}\n"))?;
    }
    let report = empirical_rates_check(&counts, &truth);
    manifest::write_sim_manifest(&args.out_dir, name, args.seed, ordering)?;
    println!(
        "wrote preset '{name}' (T={}, K={}, C={}) to {}; max |freq - p| = {:.4}",
        spec.t,
        spec.k,
        spec.c,
        args.out_dir.display(),
        report.max_abs_dev
    );
    Ok(())
}

fn run_geweke(args: GewekeArgs) -> anyhow::Result<()> {
    let mut hyper = Hyperparams::default();
    if let Some(path) = &args.config {
        let file_cfg = FileConfig::load(path)?;
        file_cfg.apply_flat_hyper(&mut hyper)?;
    }
    let cfg = GewekeConfig {
        cycles: args.cycles,
        seed: args.seed,
        hyper,
        mutation: if args.mutate_theta_jacobian {
            KernelMutation::SkipThetaJacobian
        } else {
            KernelMutation::None
        },
        ..GewekeConfig::default()
    };
    let report = geweke_joint(&cfg)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let mut f = std::fs::File::create(args.out_dir.join("geweke.csv"))?;
    use std::io::Write;
    writeln!(f, "statistic,z,p,chain_mean,prior_mean,skipped")?;
    for s in &report.stats {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            s.name, s.z, s.p, s.chain_mean, s.prior_mean, s.skipped
        )?;
    }
    println!("joint-distribution test over {} cycles:", report.cycles);
    for s in &report.stats {
        if s.skipped {
            println!("  {:10} skipped (constant statistic)", s.name);
        } else {
            println!("  {:10} z = {:+.3}  p = {:.4}", s.name, s.z, s.p);
        }
    }
    println!("min p = {:.4}, max |z| = {:.3}", report.min_p(), report.max_abs_z());
    Ok(())
}

fn run_summarize(args: SummarizeArgs) -> anyhow::Result<()> {
    let run = manifest::read_manifest(&args.out_dir)?;
    let ordering = match run.code_ordering.as_str() {
        "tree" => CodeOrdering::Tree,
        _ => CodeOrdering::Flat,
    };
    let samples = pio::read_samples(&args.out_dir.join("samples.csv"), ordering)?;
    // reuse the recorded ids and merged counts for labeling and residuals
    let (sample_ids, pair_ids, n_mutation_pairs) = manifest::read_index(&args.out_dir)?;
    let counts = pio::parse_counts(&args.out_dir.join("counts_used.tsv"))
        .context("a finished run directory must contain counts_used.tsv")?
        .counts;
    let table = pio::CountsTable {
        counts,
        sample_ids,
        pair_ids,
        n_mutation_pairs,
        warnings: Vec::new(),
    };
    let summary = write_estimates(&args.out_dir, &samples, run.estimate_cap, &table)?;
    println!("{summary}");
    Ok(())
}
