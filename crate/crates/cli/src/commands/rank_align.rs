//! Ranking alignment: score how well metric-derived rankings recover a
//! reference ranking built from pairwise judgments, or estimate the chance
//! baseline by simulating random scorers.

use crate::error::CliError;
use crate::jsonio::emit_json;
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use s2m_core::rankeval::{
    recall_at_bottom_k, recall_at_top_k, wins_ranking, MetricRecall, PairwiseJudgment,
    RankDirection, RankingList, RecallReport,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct RankAlignArgs {
    /// CSV of pairwise judgments with header item_a,item_b,winner[,annotator].
    #[arg(long, required_unless_present = "simulate", conflicts_with = "simulate")]
    pub judgments: Option<PathBuf>,
    /// Metric score files (JSON with metric, direction, and scores by item).
    #[arg(long, required_unless_present = "simulate", conflicts_with = "simulate")]
    pub scores: Vec<PathBuf>,
    /// Recall cutoff.
    #[arg(long)]
    pub k: usize,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run this many random-scorer simulations instead of reading files.
    #[arg(long)]
    pub simulate: Option<usize>,
    /// Item count per simulation.
    #[arg(long, default_value_t = 10)]
    pub items: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Deserialize)]
struct JudgmentRow {
    item_a: u64,
    item_b: u64,
    winner: u64,
    annotator: Option<String>,
}

#[derive(Deserialize)]
struct ScoreFile {
    metric: String,
    direction: RankDirection,
    scores: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct SimulationReport {
    k: usize,
    n_items: usize,
    simulations: usize,
    mean_r_at_top_k: f64,
    mean_r_at_bottom_k: f64,
}

fn run_simulation(args: &RankAlignArgs, simulations: usize) -> Result<(), CliError> {
    if simulations == 0 {
        return Err(CliError::data("invalid_config", "simulate needs at least one run"));
    }
    let reference = RankingList::from_order((0..args.items as u64).collect())?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut top_sum = 0.0;
    let mut bottom_sum = 0.0;
    for _ in 0..simulations {
        let scores: BTreeMap<u64, f64> = (0..args.items as u64)
            .map(|item| (item, rng.random::<f64>()))
            .collect();
        let candidate = RankingList::from_scores(scores, RankDirection::Descending)?;
        top_sum += recall_at_top_k(&reference, &candidate, args.k)?;
        bottom_sum += recall_at_bottom_k(&reference, &candidate, args.k)?;
    }
    emit_json(
        args.out.as_deref(),
        &SimulationReport {
            k: args.k,
            n_items: args.items,
            simulations,
            mean_r_at_top_k: top_sum / simulations as f64,
            mean_r_at_bottom_k: bottom_sum / simulations as f64,
        },
    )
}

pub fn run(args: &RankAlignArgs) -> Result<(), CliError> {
    if let Some(simulations) = args.simulate {
        return run_simulation(args, simulations);
    }
    let judgments_path = args.judgments.as_ref().expect("clap enforces presence");
    if !judgments_path.exists() {
        return Err(CliError::missing_file(judgments_path));
    }
    let mut reader = csv::Reader::from_path(judgments_path)?;
    let mut judgments = Vec::new();
    for row in reader.deserialize() {
        let row: JudgmentRow = row?;
        judgments.push(PairwiseJudgment {
            item_a: row.item_a,
            item_b: row.item_b,
            winner: row.winner,
            annotator: row.annotator,
        });
    }
    let mut universe = std::collections::BTreeSet::new();
    for judgment in &judgments {
        universe.insert(judgment.item_a);
        universe.insert(judgment.item_b);
    }
    let universe: Vec<u64> = universe.into_iter().collect();
    let reference = wins_ranking(&judgments, &universe)?;

    let mut per_metric = Vec::new();
    for path in &args.scores {
        if !path.exists() {
            return Err(CliError::missing_file(path));
        }
        let file: ScoreFile = serde_json::from_slice(&std::fs::read(path)?)?;
        let mut scores = BTreeMap::new();
        for (key, value) in file.scores {
            let item = key.parse::<u64>().map_err(|_| {
                CliError::data(
                    "invalid_item_id",
                    format!("score key {key:?} in {} is not an integer id", path.display()),
                )
            })?;
            scores.insert(item, value);
        }
        let candidate = RankingList::from_scores(scores, file.direction)?;
        per_metric.push(MetricRecall {
            metric: file.metric,
            direction: file.direction,
            r_at_top_k: recall_at_top_k(&reference, &candidate, args.k)?,
            r_at_bottom_k: recall_at_bottom_k(&reference, &candidate, args.k)?,
        });
    }
    let report = RecallReport::from_metrics(args.k, per_metric)?;
    emit_json(args.out.as_deref(), &report)
}
