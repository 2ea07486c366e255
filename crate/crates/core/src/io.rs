//! Count-table ingestion and every output file format.
//!
//! Counts arrive as a TSV with one row per (sample, pair) and the eight
//! outcome columns; marginal SNVs arrive as (total, variant) rows and are
//! embedded as right-missing-only pairs after the mutation pairs. All
//! outputs are CSV/TSV with headers.

use crate::estimate::{Draw, PosteriorSamples};
use crate::genotype::{CodeOrdering, GenotypeCode, GenotypeMatrix, ReadOutcome, NUM_OUTCOMES};
use crate::likelihood::{embed_snv, ReadCounts};
use crate::tree::TreeTopology;
use crate::{CoreError, Result};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Parsed counts plus the id-to-position maps and any repair warnings.
#[derive(Clone, Debug)]
pub struct CountsTable {
    pub counts: ReadCounts,
    pub sample_ids: Vec<String>,
    pub pair_ids: Vec<String>,
    /// Positions `>= n_mutation_pairs` hold embedded SNVs.
    pub n_mutation_pairs: usize,
    pub warnings: Vec<String>,
}

fn data_err(path: &Path, line: usize, msg: impl Into<String>) -> CoreError {
    CoreError::DataFormat { path: path.display().to_string(), line, msg: msg.into() }
}

/// Parse a mutation-pair count TSV. Ids keep their first-appearance
/// order; a pair missing from some sample becomes an all-zero row with a
/// warning.
pub fn parse_counts(path: &Path) -> Result<CountsTable> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(data_err(path, 1, "empty file")),
    };
    let expect = format!("sample_id\tpair_id\t{}", ReadOutcome::LABELS.join("\t"));
    if header.trim_end() != expect {
        return Err(data_err(path, 1, format!("bad header; expected '{expect}'")));
    }
    let mut sample_ids: Vec<String> = Vec::new();
    let mut pair_ids: Vec<String> = Vec::new();
    let mut rows: BTreeMap<(usize, usize), [f64; NUM_OUTCOMES]> = BTreeMap::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split('\t').collect();
        if fields.len() != 2 + NUM_OUTCOMES {
            return Err(data_err(
                path,
                lineno,
                format!("expected {} fields, found {}", 2 + NUM_OUTCOMES, fields.len()),
            ));
        }
        let t = position_of(&mut sample_ids, fields[0]);
        let k = position_of(&mut pair_ids, fields[1]);
        let mut row = [0.0; NUM_OUTCOMES];
        for (g, raw) in fields[2..].iter().enumerate() {
            let v: i64 = raw.parse().map_err(|_| {
                data_err(path, lineno, format!("unparseable count '{raw}'"))
            })?;
            if v < 0 {
                return Err(data_err(path, lineno, format!("negative count {v}")));
            }
            row[g] = v as f64;
        }
        if rows.insert((t, k), row).is_some() {
            return Err(data_err(
                path,
                lineno,
                format!("duplicate key ({}, {})", fields[0], fields[1]),
            ));
        }
    }
    if sample_ids.is_empty() || pair_ids.is_empty() {
        return Err(data_err(path, 1, "no data rows"));
    }
    let mut warnings = Vec::new();
    let mut counts = ReadCounts::zeros(sample_ids.len(), pair_ids.len());
    for t in 0..sample_ids.len() {
        for k in 0..pair_ids.len() {
            match rows.get(&(t, k)) {
                Some(row) => counts.set_row(t, k, *row),
                None => warnings.push(format!(
                    "pair {} missing in sample {}; inserted an all-zero row",
                    pair_ids[k], sample_ids[t]
                )),
            }
        }
    }
    let n = pair_ids.len();
    Ok(CountsTable {
        counts,
        sample_ids,
        pair_ids,
        n_mutation_pairs: n,
        warnings,
    })
}

fn position_of(ids: &mut Vec<String>, id: &str) -> usize {
    match ids.iter().position(|x| x == id) {
        Some(i) => i,
        None => {
            ids.push(id.to_string());
            ids.len() - 1
        }
    }
}

/// One parsed SNV record.
#[derive(Clone, Debug)]
pub struct SnvRecord {
    pub sample: String,
    pub snv: String,
    pub total: u64,
    pub variant: u64,
}

/// Parse a marginal-SNV TSV.
pub fn parse_snv(path: &Path) -> Result<Vec<SnvRecord>> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(data_err(path, 1, "empty file")),
    };
    if header.trim_end() != "sample_id\tsnv_id\tn_total\tn_variant" {
        return Err(data_err(path, 1, "bad header; expected 'sample_id\tsnv_id\tn_total\tn_variant'"));
    }
    let mut out = Vec::new();
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split('\t').collect();
        if fields.len() != 4 {
            return Err(data_err(path, lineno, format!("expected 4 fields, found {}", fields.len())));
        }
        let total: u64 = fields[2]
            .parse()
            .map_err(|_| data_err(path, lineno, format!("unparseable count '{}'", fields[2])))?;
        let variant: u64 = fields[3]
            .parse()
            .map_err(|_| data_err(path, lineno, format!("unparseable count '{}'", fields[3])))?;
        if variant > total {
            return Err(data_err(path, lineno, format!("variant {variant} exceeds total {total}")));
        }
        let key = (fields[0].to_string(), fields[1].to_string());
        if seen.insert(key.clone(), lineno).is_some() {
            return Err(data_err(path, lineno, format!("duplicate key ({}, {})", key.0, key.1)));
        }
        out.push(SnvRecord { sample: key.0, snv: key.1, total, variant });
    }
    Ok(out)
}

/// Append SNVs to a counts table as embedded right-missing pairs.
pub fn append_snvs(table: &mut CountsTable, records: &[SnvRecord]) -> Result<()> {
    let mut snv_ids: Vec<String> = Vec::new();
    for r in records {
        if !table.sample_ids.iter().any(|s| s == &r.sample) {
            return Err(CoreError::Config(format!(
                "SNV sample id '{}' does not appear in the counts table",
                r.sample
            )));
        }
        if !snv_ids.iter().any(|s| s == &r.snv) {
            snv_ids.push(r.snv.clone());
        }
    }
    let (t_n, k_n) = (table.sample_ids.len(), table.pair_ids.len());
    let mut counts = ReadCounts::zeros(t_n, k_n + snv_ids.len());
    for t in 0..t_n {
        for k in 0..k_n {
            let mut row = [0.0; NUM_OUTCOMES];
            row.copy_from_slice(table.counts.row(t, k));
            counts.set_row(t, k, row);
        }
    }
    for r in records {
        let t = table.sample_ids.iter().position(|s| s == &r.sample).unwrap();
        let s = snv_ids.iter().position(|x| x == &r.snv).unwrap();
        counts.set_row(t, k_n + s, embed_snv(r.total, r.variant)?);
    }
    for t in 0..t_n {
        for (s, id) in snv_ids.iter().enumerate() {
            if counts.total(t, k_n + s) == 0.0 {
                table
                    .warnings
                    .push(format!("SNV {} missing in sample {}; zero row", id, table.sample_ids[t]));
            }
        }
    }
    table.counts = counts;
    table.pair_ids.extend(snv_ids);
    Ok(())
}

/// Write a counts table (mutation-pair positions only when `n_pairs` is
/// given, otherwise everything).
pub fn write_counts_tsv(
    path: &Path,
    counts: &ReadCounts,
    sample_ids: &[String],
    pair_ids: &[String],
    limit_pairs: Option<usize>,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "sample_id\tpair_id\t{}", ReadOutcome::LABELS.join("\t"))?;
    let k_n = limit_pairs.unwrap_or(counts.n_pairs());
    for t in 0..counts.n_samples() {
        for k in 0..k_n {
            write!(f, "{}\t{}", sample_ids[t], pair_ids[k])?;
            for g in 0..NUM_OUTCOMES {
                write!(f, "\t{}", counts.n(t, k, g) as i64)?;
            }
            writeln!(f)?;
        }
    }
    Ok(())
}

/// Write trailing embedded-SNV positions as a marginal-SNV TSV: the total
/// is the right-missing coverage and the variant count its mutated class.
pub fn write_snv_tsv(
    path: &Path,
    counts: &ReadCounts,
    sample_ids: &[String],
    pair_ids: &[String],
    from_pair: usize,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "sample_id\tsnv_id\tn_total\tn_variant")?;
    for t in 0..counts.n_samples() {
        for k in from_pair..counts.n_pairs() {
            let total = (counts.n(t, k, 6) + counts.n(t, k, 7)) as i64;
            let variant = counts.n(t, k, 7) as i64;
            writeln!(f, "{}\t{}\t{}\t{}", sample_ids[t], pair_ids[k], total, variant)?;
        }
    }
    Ok(())
}

/// Write the id-to-position index.
pub fn write_index(
    path: &Path,
    sample_ids: &[String],
    pair_ids: &[String],
    n_mutation_pairs: usize,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "kind,id,position")?;
    for (i, id) in sample_ids.iter().enumerate() {
        writeln!(f, "sample,{id},{i}")?;
    }
    for (i, id) in pair_ids.iter().enumerate() {
        let kind = if i < n_mutation_pairs { "pair" } else { "snv" };
        writeln!(f, "{kind},{id},{i}")?;
    }
    Ok(())
}

/// Write a genotype matrix as CSV of codes in the given ordering.
pub fn write_genotypes(
    path: &Path,
    z: &GenotypeMatrix,
    pair_ids: &[String],
    ordering: CodeOrdering,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let cols: Vec<String> = (1..=z.n_subclones()).map(|c| format!("subclone_{c}")).collect();
    writeln!(f, "pair_id,{}", cols.join(","))?;
    for k in 0..z.n_pairs() {
        write!(f, "{}", pair_ids[k])?;
        for c in 0..z.n_subclones() {
            write!(f, ",{}", z.code(k, c, ordering).get())?;
        }
        writeln!(f)?;
    }
    Ok(())
}

/// Write estimated weights (background, optional normal clone, subclones).
pub fn write_weights(
    path: &Path,
    w: &[Vec<f64>],
    w_star: Option<&[f64]>,
    sample_ids: &[String],
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let c = w[0].len() - 1;
    let mut header = vec!["sample_id".to_string(), "w0".to_string()];
    if w_star.is_some() {
        header.push("w_star".to_string());
    }
    header.extend((1..=c).map(|i| format!("w{i}")));
    writeln!(f, "{}", header.join(","))?;
    for (t, row) in w.iter().enumerate() {
        write!(f, "{},{}", sample_ids[t], row[0])?;
        if let Some(ws) = w_star {
            write!(f, ",{}", ws[t])?;
        }
        for x in &row[1..] {
            write!(f, ",{x}")?;
        }
        writeln!(f)?;
    }
    Ok(())
}

/// Write the noise vector.
pub fn write_rho(path: &Path, rho: &[f64; NUM_OUTCOMES]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    let labels: Vec<String> =
        ReadOutcome::LABELS.iter().map(|l| l.replacen('n', "rho_", 1)).collect();
    writeln!(f, "{}", labels.join(","))?;
    let vals: Vec<String> = rho.iter().map(|x| x.to_string()).collect();
    writeln!(f, "{}", vals.join(","))?;
    Ok(())
}

/// Write the posterior table of the model size.
pub fn write_c_posterior(path: &Path, table: &[(usize, f64)]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "c,probability")?;
    for (c, p) in table {
        writeln!(f, "{c},{p}")?;
    }
    Ok(())
}

/// Write the posterior table of (topology, size).
pub fn write_tree_posterior(path: &Path, table: &[(TreeTopology, f64)]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "parent_vector,c,probability")?;
    for (t, p) in table {
        let pv: Vec<String> = t.as_slice().iter().map(|x| x.to_string()).collect();
        writeln!(f, "{},{},{}", pv.join(":"), t.n_nodes(), p)?;
    }
    Ok(())
}

/// Persist retained draws so summaries can be recomputed without
/// re-sampling. Genotype codes are stored in the samples' ordering;
/// vector fields are `:`-joined within their CSV cell.
pub fn write_samples(path: &Path, samples: &PosteriorSamples) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "draw,c,log_lik,log_prior_x,tree,z,w,w_star,rho")?;
    for (i, d) in samples.draws.iter().enumerate() {
        let z: Vec<String> = (0..d.z.n_pairs())
            .flat_map(|k| {
                (0..d.z.n_subclones())
                    .map(move |c| d.z.code(k, c, samples.ordering).get().to_string())
            })
            .collect();
        let w: Vec<String> =
            d.w.iter().flat_map(|row| row.iter().map(|x| x.to_string())).collect();
        let ws = match &d.w_star {
            Some(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":"),
            None => String::new(),
        };
        let tree = match &d.tree {
            Some(t) => {
                t.as_slice().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":")
            }
            None => String::new(),
        };
        let rho: Vec<String> = d.rho.iter().map(|x| x.to_string()).collect();
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            i,
            d.c,
            d.log_lik,
            d.log_prior_x,
            tree,
            z.join(":"),
            w.join(":"),
            ws,
            rho.join(":")
        )?;
    }
    Ok(())
}

/// Read back a samples file written by [`write_samples`].
pub fn read_samples(path: &Path, ordering: CodeOrdering) -> Result<PosteriorSamples> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, line)) => {
            let line = line?;
            if line.trim_end() != "draw,c,log_lik,log_prior_x,tree,z,w,w_star,rho" {
                return Err(data_err(path, 1, "bad samples header"));
            }
        }
        None => return Err(data_err(path, 1, "empty samples file")),
    }
    let mut draws = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 9 {
            return Err(data_err(path, lineno, format!("expected 9 fields, found {}", fields.len())));
        }
        let c: usize = fields[1]
            .parse()
            .map_err(|_| data_err(path, lineno, "unparseable model size"))?;
        let log_lik: f64 = fields[2]
            .parse()
            .map_err(|_| data_err(path, lineno, "unparseable log likelihood"))?;
        let log_prior_x: f64 = fields[3]
            .parse()
            .map_err(|_| data_err(path, lineno, "unparseable log prior"))?;
        let tree = if fields[4].is_empty() {
            None
        } else {
            let pv: std::result::Result<Vec<usize>, _> =
                fields[4].split(':').map(|x| x.parse::<usize>()).collect();
            Some(TreeTopology::new(
                pv.map_err(|_| data_err(path, lineno, "unparseable parent vector"))?,
            )?)
        };
        let z_codes: std::result::Result<Vec<u8>, _> =
            fields[5].split(':').map(|x| x.parse::<u8>()).collect();
        let z_codes = z_codes.map_err(|_| data_err(path, lineno, "unparseable genotypes"))?;
        if z_codes.len() % c != 0 {
            return Err(data_err(path, lineno, "genotype cell count does not divide by c"));
        }
        let k = z_codes.len() / c;
        let mut z = GenotypeMatrix::reference(k, c);
        for kk in 0..k {
            for cc in 0..c {
                z.set_code(kk, cc, GenotypeCode::new(z_codes[kk * c + cc])?, ordering);
            }
        }
        let w_flat: std::result::Result<Vec<f64>, _> =
            fields[6].split(':').map(|x| x.parse::<f64>()).collect();
        let w_flat = w_flat.map_err(|_| data_err(path, lineno, "unparseable weights"))?;
        if w_flat.len() % (c + 1) != 0 {
            return Err(data_err(path, lineno, "weight cell count does not divide by c+1"));
        }
        let w: Vec<Vec<f64>> = w_flat.chunks(c + 1).map(|ch| ch.to_vec()).collect();
        let w_star = if fields[7].is_empty() {
            None
        } else {
            let v: std::result::Result<Vec<f64>, _> =
                fields[7].split(':').map(|x| x.parse::<f64>()).collect();
            Some(v.map_err(|_| data_err(path, lineno, "unparseable purity weights"))?)
        };
        let rho_v: std::result::Result<Vec<f64>, _> =
            fields[8].split(':').map(|x| x.parse::<f64>()).collect();
        let rho_v = rho_v.map_err(|_| data_err(path, lineno, "unparseable noise"))?;
        if rho_v.len() != NUM_OUTCOMES {
            return Err(data_err(path, lineno, "noise vector must have 8 entries"));
        }
        let mut rho = [0.0; NUM_OUTCOMES];
        rho.copy_from_slice(&rho_v);
        draws.push(Draw { c, z, w, w_star, rho, tree, log_lik, log_prior_x });
    }
    Ok(PosteriorSamples { draws, ordering })
}

/// Write telemetry: one row per retained iteration.
pub fn write_telemetry(path: &Path, telemetry: &crate::mcmc::Telemetry) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "iter,c,log_lik,log_post,candidate_log_post")?;
    for row in &telemetry.rows {
        let cands: Vec<String> =
            row.candidate_log_post.iter().map(|x| x.to_string()).collect();
        writeln!(f, "{},{},{},{},{}", row.iter, row.c, row.log_lik, row.log_post, cands.join(":"))?;
    }
    Ok(())
}

/// Write the acceptance-rate summary.
pub fn write_acceptance(path: &Path, telemetry: &crate::mcmc::Telemetry) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "move,rate")?;
    writeln!(f, "theta,{}", telemetry.theta_accept)?;
    writeln!(f, "rho,{}", telemetry.rho_accept)?;
    writeln!(f, "swap,{}", telemetry.swap_accept)?;
    writeln!(f, "transdim,{}", telemetry.transdim_accept)?;
    Ok(())
}
