//! Seed selection over an archive directory: load every (seed, step, layer)
//! record named by the manifest, aggregate per-seed signatures over the
//! configured region, and rank seeds by leave-one-out consensus.

use crate::error::CliError;
use crate::jsonio::emit_json;
use crate::pngio::load_mask;
use clap::Args;
use rayon::prelude::*;
use s2m_core::archive::{archive_file_name, read_manifest, read_record_file, MANIFEST_FILE};
use s2m_core::attention::{aggregate_signature, mask_to_tokens, RegionKind, Signature};
use s2m_core::consensus::{evaluate_consensus, ConsensusResult, SimilarityBackend};
use s2m_core::sinkhorn::SinkhornParams;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricArg {
    Cosine,
    Sinkhorn,
}

pub fn parse_metric(s: &str) -> Result<MetricArg, String> {
    match s {
        "cosine" => Ok(MetricArg::Cosine),
        "sinkhorn" => Ok(MetricArg::Sinkhorn),
        _ => Err(format!("unknown metric {s:?} (expected cosine or sinkhorn)")),
    }
}

pub fn parse_region(s: &str) -> Result<RegionKind, String> {
    match s {
        "foreground" => Ok(RegionKind::Foreground),
        "inverse_foreground" => Ok(RegionKind::InverseForeground),
        "placement_mask" => Ok(RegionKind::PlacementMask),
        _ => Err(format!(
            "unknown region {s:?} (expected foreground, inverse_foreground, or placement_mask)"
        )),
    }
}

/// Effective configuration, echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub t_early: u16,
    pub layer_min: u16,
    pub layer_max: u16,
    pub region: RegionKind,
    pub metric: &'static str,
    pub epsilon: f64,
    pub coverage_threshold: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Args)]
pub struct SelectSeedArgs {
    /// Directory holding the archive files and their manifest.json.
    #[arg(long)]
    pub archive_dir: PathBuf,
    /// First-frame object mask PNG; query tokens come from this region.
    #[arg(long)]
    pub mask: PathBuf,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Denoising step whose attention is consumed.
    #[arg(long, default_value_t = 10)]
    pub t_early: u16,
    #[arg(long, default_value_t = 22)]
    pub layer_min: u16,
    #[arg(long, default_value_t = 26)]
    pub layer_max: u16,
    /// Query-token region: foreground, inverse_foreground, or placement_mask.
    #[arg(long, default_value = "inverse_foreground", value_parser = parse_region)]
    pub region: RegionKind,
    /// Similarity backend: cosine or sinkhorn.
    #[arg(long, default_value = "cosine", value_parser = parse_metric)]
    pub metric: MetricArg,
    /// Sinkhorn regularization strength (sinkhorn backend only).
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Minimum fraction of a token's pixels the mask must cover.
    #[arg(long, default_value_t = 0.5)]
    pub coverage: f64,
}

#[derive(Serialize)]
struct SelectSeedReport {
    config: RunConfig,
    #[serde(flatten)]
    result: ConsensusResult,
}

pub fn run(args: &SelectSeedArgs) -> Result<(), CliError> {
    if args.t_early < 1 {
        return Err(CliError::data("invalid_config", "t_early must be at least 1"));
    }
    if args.layer_min > args.layer_max {
        return Err(CliError::data(
            "invalid_config",
            format!(
                "layer range is empty: {} > {}",
                args.layer_min, args.layer_max
            ),
        ));
    }
    if !(args.epsilon.is_finite() && args.epsilon > 0.0) {
        return Err(CliError::data(
            "invalid_config",
            format!("epsilon must be positive and finite, got {}", args.epsilon),
        ));
    }

    let manifest_path = args.archive_dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(CliError::missing_file(&manifest_path));
    }
    let manifest = read_manifest(&args.archive_dir)?;

    // every seed named anywhere in the manifest must have the full layer
    // range at t_early
    let mut by_seed: BTreeMap<u32, BTreeMap<u16, &str>> = BTreeMap::new();
    for entry in &manifest.entries {
        by_seed.entry(entry.seed_id).or_default();
        if entry.step_index == args.t_early
            && (args.layer_min..=args.layer_max).contains(&entry.layer_index)
        {
            by_seed
                .get_mut(&entry.seed_id)
                .expect("inserted above")
                .insert(entry.layer_index, entry.file.as_str());
        }
    }
    if by_seed.is_empty() {
        return Err(CliError::data(
            "missing_archive",
            format!("manifest in {} lists no archives", args.archive_dir.display()),
        ));
    }
    let mut seed_files: Vec<(u32, Vec<PathBuf>)> = Vec::new();
    for (&seed_id, layers) in &by_seed {
        let mut files = Vec::new();
        for layer in args.layer_min..=args.layer_max {
            match layers.get(&layer) {
                Some(file) => files.push(args.archive_dir.join(file)),
                None => {
                    return Err(CliError::data(
                        "missing_archive",
                        format!(
                            "seed {} has no archive for step {} layer {} (expected {})",
                            seed_id,
                            args.t_early,
                            layer,
                            archive_file_name(seed_id, args.t_early, layer)
                        ),
                    ))
                }
            }
        }
        seed_files.push((seed_id, files));
    }

    let records = seed_files
        .par_iter()
        .map(|(_, files)| {
            files
                .iter()
                .map(|path| read_record_file(path).map_err(CliError::from))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let grid = *records[0][0].grid();
    for per_seed in &records {
        for record in per_seed {
            if *record.grid() != grid {
                return Err(CliError::data(
                    "grid_mismatch",
                    format!(
                        "seed {} records use a different grid than seed {}",
                        record.seed_id(),
                        records[0][0].seed_id()
                    ),
                ));
            }
        }
    }

    let mask = load_mask(&args.mask)?;
    let tokens = mask_to_tokens(&mask, &grid, args.region, args.coverage)?;
    let signatures = records
        .par_iter()
        .map(|per_seed| {
            aggregate_signature(per_seed, args.layer_min, args.layer_max, &tokens)
                .map_err(CliError::from)
        })
        .collect::<Result<Vec<Signature>, _>>()?;

    let backend = match args.metric {
        MetricArg::Cosine => SimilarityBackend::cosine(),
        MetricArg::Sinkhorn => SimilarityBackend::sinkhorn(
            &grid,
            SinkhornParams {
                epsilon: args.epsilon,
                ..SinkhornParams::default()
            },
        ),
    };
    let result = evaluate_consensus(&signatures, &backend)?;
    let config = RunConfig {
        t_early: args.t_early,
        layer_min: args.layer_min,
        layer_max: args.layer_max,
        region: args.region,
        metric: backend.metric_name(),
        epsilon: args.epsilon,
        coverage_threshold: args.coverage,
        n_seeds: signatures.len(),
    };
    emit_json(args.out.as_deref(), &SelectSeedReport { config, result })
}
