//! Consensus scoring of seed signatures and argmax selection.
//!
//! Each candidate seed is scored by the similarity of its signature to the
//! mean signature of all other candidates; the selected seed is the argmax,
//! ties broken by smallest seed id. Two similarity backends exist: cosine
//! (the default) and negated Sinkhorn distance on the token grid.

use crate::attention::Signature;
use crate::grid::TokenGrid;
use crate::sinkhorn::{
    sinkhorn_distance, CostMatrix, SinkhornError, SinkhornParams, TransportProblem,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsensusError {
    #[error("need at least 2 signatures, got {0}")]
    TooFewSeeds(usize),
    #[error("signature vectors differ in length ({first} vs {other})")]
    DimensionMismatch { first: usize, other: usize },
    #[error("duplicate seed_id {0}")]
    DuplicateSeed(u32),
    #[error("score for seed {seed_id} is not finite")]
    NonFiniteScore { seed_id: u32 },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("empty score list")]
    EmptyScores,
    #[error(transparent)]
    Transport(#[from] SinkhornError),
}

/// Similarity measure used to compare a signature against the leave-one-out
/// mean of the others.
#[derive(Debug, Clone)]
pub enum SimilarityBackend {
    Cosine,
    /// Negated entropic transport distance; the cost matrix is fixed at
    /// construction so repeated comparisons share it.
    Sinkhorn {
        cost: CostMatrix,
        params: SinkhornParams,
    },
}

impl SimilarityBackend {
    pub fn cosine() -> SimilarityBackend {
        SimilarityBackend::Cosine
    }

    pub fn sinkhorn(grid: &TokenGrid, params: SinkhornParams) -> SimilarityBackend {
        SimilarityBackend::Sinkhorn {
            cost: CostMatrix::from_grid(grid),
            params,
        }
    }

    pub fn metric_name(&self) -> &'static str {
        match self {
            SimilarityBackend::Cosine => "cosine",
            SimilarityBackend::Sinkhorn { .. } => "sinkhorn",
        }
    }

    /// Similarity between two distributions; higher is more alike.
    pub fn similarity(&self, u: &[f64], v: &[f64]) -> Result<f64, ConsensusError> {
        match self {
            SimilarityBackend::Cosine => cosine_similarity(u, v),
            SimilarityBackend::Sinkhorn { cost, params } => {
                let problem = TransportProblem::new(u.to_vec(), v.to_vec(), cost, *params)?;
                Ok(-sinkhorn_distance(&problem)?.distance)
            }
        }
    }
}

/// Cosine of the angle between two vectors, in [-1, 1].
///
/// Bitwise-identical inputs short-circuit to exactly 1.0; the norm product
/// otherwise carries a spurious ulp.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, ConsensusError> {
    if u.len() != v.len() {
        return Err(ConsensusError::DimensionMismatch {
            first: u.len(),
            other: v.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut uu = 0.0f64;
    let mut vv = 0.0f64;
    for (&a, &b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(ConsensusError::ZeroVector);
    }
    if u == v {
        return Ok(1.0);
    }
    Ok(dot / (uu.sqrt() * vv.sqrt()))
}

/// Mean absolute-difference mass between two distributions, in [0, 1].
/// Panics if the lengths differ.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "length mismatch");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// One seed's consensus score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedScore {
    pub seed_id: u32,
    pub score: f64,
}

/// Scores, full ranking, and the selected seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusResult {
    /// Ordered by ascending seed_id.
    pub scores: Vec<SeedScore>,
    /// Seed ids by descending score, ties by ascending id.
    pub ranking: Vec<u32>,
    pub selected: u32,
    pub metric_name: String,
}

/// Scores every signature against the leave-one-out mean of the rest.
///
/// The mean is accumulated over the other signatures in ascending seed_id
/// order (never derived by subtraction), so scores are bitwise invariant to
/// the input permutation and exactly symmetric at N = 2. The mean is
/// renormalized to sum 1 for the Sinkhorn backend, which requires exact
/// distributions; cosine is scale-invariant and skips that.
pub fn consensus_scores(
    signatures: &[Signature],
    backend: &SimilarityBackend,
) -> Result<Vec<SeedScore>, ConsensusError> {
    if signatures.len() < 2 {
        return Err(ConsensusError::TooFewSeeds(signatures.len()));
    }
    let dim = signatures[0].vector().len();
    for sig in signatures {
        if sig.vector().len() != dim {
            return Err(ConsensusError::DimensionMismatch {
                first: dim,
                other: sig.vector().len(),
            });
        }
    }
    let mut ordered: Vec<&Signature> = signatures.iter().collect();
    ordered.sort_by_key(|s| s.seed_id());
    for pair in ordered.windows(2) {
        if pair[0].seed_id() == pair[1].seed_id() {
            return Err(ConsensusError::DuplicateSeed(pair[0].seed_id()));
        }
    }

    let n_others = (ordered.len() - 1) as f64;
    let renormalize = matches!(backend, SimilarityBackend::Sinkhorn { .. });
    let mut scores = Vec::with_capacity(ordered.len());
    for (i, sig) in ordered.iter().enumerate() {
        let mut mean = vec![0.0f64; dim];
        for (j, other) in ordered.iter().enumerate() {
            if j == i {
                continue;
            }
            for (m, &v) in mean.iter_mut().zip(other.vector()) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n_others;
        }
        if renormalize {
            let sum: f64 = mean.iter().sum();
            for m in mean.iter_mut() {
                *m /= sum;
            }
        }
        scores.push(SeedScore {
            seed_id: sig.seed_id(),
            score: backend.similarity(sig.vector(), &mean)?,
        });
    }
    Ok(scores)
}

/// Seed id with the maximal score; ties go to the smallest id.
pub fn select_seed(scores: &[SeedScore]) -> Result<u32, ConsensusError> {
    if scores.is_empty() {
        return Err(ConsensusError::EmptyScores);
    }
    let mut best: Option<&SeedScore> = None;
    for s in scores {
        if !s.score.is_finite() {
            return Err(ConsensusError::NonFiniteScore { seed_id: s.seed_id });
        }
        best = match best {
            None => Some(s),
            Some(b) if s.score > b.score || (s.score == b.score && s.seed_id < b.seed_id) => {
                Some(s)
            }
            Some(b) => Some(b),
        };
    }
    Ok(best.expect("non-empty").seed_id)
}

/// Seed ids by descending score, ties by ascending id.
pub fn rank_seeds(scores: &[SeedScore]) -> Result<Vec<u32>, ConsensusError> {
    if scores.is_empty() {
        return Err(ConsensusError::EmptyScores);
    }
    for s in scores {
        if !s.score.is_finite() {
            return Err(ConsensusError::NonFiniteScore { seed_id: s.seed_id });
        }
    }
    let mut sorted: Vec<&SeedScore> = scores.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.seed_id.cmp(&b.seed_id)));
    Ok(sorted.iter().map(|s| s.seed_id).collect())
}

/// Scores, ranks, and selects in one pass.
pub fn evaluate_consensus(
    signatures: &[Signature],
    backend: &SimilarityBackend,
) -> Result<ConsensusResult, ConsensusError> {
    let scores = consensus_scores(signatures, backend)?;
    let ranking = rank_seeds(&scores)?;
    let selected = ranking[0];
    Ok(ConsensusResult {
        scores,
        ranking,
        selected,
        metric_name: backend.metric_name().to_string(),
    })
}
