//! Pairwise-preference aggregation and recall-based rank alignment.
//!
//! Human judgments are folded into per-item win counts, metric scores into
//! rankings, and the two compared by the recall of their top-k and bottom-k
//! sets. Ties always break by ascending item id so every ranking is
//! deterministic; tie groups are reported alongside.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type ItemId = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("item universe is empty")]
    EmptyUniverse,
    #[error("duplicate item {0}")]
    DuplicateItem(ItemId),
    #[error("judgment references unknown item {0}")]
    UnknownItem(ItemId),
    #[error("judgment ({item_a}, {item_b}, winner {winner}) is malformed")]
    InvalidJudgment {
        item_a: ItemId,
        item_b: ItemId,
        winner: ItemId,
    },
    #[error("score for item {0} is not finite")]
    NonFiniteScore(ItemId),
    #[error("rankings cover different item universes")]
    UniverseMismatch,
    #[error("k = {k} is outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("metric set is empty")]
    EmptyMetricSet,
}

/// One forced-choice comparison between two items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseJudgment {
    pub item_a: ItemId,
    pub item_b: ItemId,
    pub winner: ItemId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
}

impl PairwiseJudgment {
    pub fn new(
        item_a: ItemId,
        item_b: ItemId,
        winner: ItemId,
    ) -> Result<PairwiseJudgment, RankError> {
        let j = PairwiseJudgment {
            item_a,
            item_b,
            winner,
            annotator: None,
        };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<(), RankError> {
        if self.item_a == self.item_b || (self.winner != self.item_a && self.winner != self.item_b)
        {
            return Err(RankError::InvalidJudgment {
                item_a: self.item_a,
                item_b: self.item_b,
                winner: self.winner,
            });
        }
        Ok(())
    }
}

/// Whether larger scores rank first (similarity-like) or last
/// (distance-like).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankDirection {
    Descending,
    Ascending,
}

/// Which end of a ranking a recall is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankEnd {
    Top,
    Bottom,
}

/// A total order over the item universe, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingList {
    order: Vec<ItemId>,
    scores: BTreeMap<ItemId, f64>,
    /// Maximal runs of equal-scored items (size at least 2), in rank order.
    tie_groups: Vec<Vec<ItemId>>,
}

impl RankingList {
    /// Ranks by score in the given direction; equal scores break by
    /// ascending item id and are recorded as a tie group.
    pub fn from_scores(
        scores: BTreeMap<ItemId, f64>,
        direction: RankDirection,
    ) -> Result<RankingList, RankError> {
        if scores.is_empty() {
            return Err(RankError::EmptyUniverse);
        }
        for (&id, &score) in &scores {
            if !score.is_finite() {
                return Err(RankError::NonFiniteScore(id));
            }
        }
        // BTreeMap iteration is id-ascending, and the sort is stable, so
        // equal scores keep ascending id order
        let mut order: Vec<ItemId> = scores.keys().copied().collect();
        order.sort_by(|a, b| match direction {
            RankDirection::Descending => scores[b].total_cmp(&scores[a]),
            RankDirection::Ascending => scores[a].total_cmp(&scores[b]),
        });
        let mut tie_groups = Vec::new();
        let mut run = vec![order[0]];
        for pair in order.windows(2) {
            if scores[&pair[0]] == scores[&pair[1]] {
                run.push(pair[1]);
            } else {
                if run.len() > 1 {
                    tie_groups.push(std::mem::take(&mut run));
                }
                run = vec![pair[1]];
            }
        }
        if run.len() > 1 {
            tie_groups.push(run);
        }
        Ok(RankingList {
            order,
            scores,
            tie_groups,
        })
    }

    /// Wraps an explicit order; scores are the positional values n, n-1, ...
    /// so the universe invariant holds.
    pub fn from_order(order: Vec<ItemId>) -> Result<RankingList, RankError> {
        if order.is_empty() {
            return Err(RankError::EmptyUniverse);
        }
        let mut seen = BTreeSet::new();
        for &id in &order {
            if !seen.insert(id) {
                return Err(RankError::DuplicateItem(id));
            }
        }
        let n = order.len();
        let scores = order
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, (n - i) as f64))
            .collect();
        Ok(RankingList {
            order,
            scores,
            tie_groups: Vec::new(),
        })
    }

    pub fn order(&self) -> &[ItemId] {
        &self.order
    }

    pub fn scores(&self) -> &BTreeMap<ItemId, f64> {
        &self.scores
    }

    pub fn tie_groups(&self) -> &[Vec<ItemId>] {
        &self.tie_groups
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn end_set(&self, k: usize, end: RankEnd) -> BTreeSet<ItemId> {
        match end {
            RankEnd::Top => self.order[..k].iter().copied().collect(),
            RankEnd::Bottom => self.order[self.order.len() - k..].iter().copied().collect(),
        }
    }
}

/// Unique unordered pairs among n items: n(n-1)/2.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Ranks the universe by how many judgments each item won.
pub fn wins_ranking(
    judgments: &[PairwiseJudgment],
    items: &[ItemId],
) -> Result<RankingList, RankError> {
    if items.is_empty() {
        return Err(RankError::EmptyUniverse);
    }
    let mut counts: BTreeMap<ItemId, f64> = BTreeMap::new();
    for &id in items {
        if counts.insert(id, 0.0).is_some() {
            return Err(RankError::DuplicateItem(id));
        }
    }
    for j in judgments {
        j.validate()?;
        for id in [j.item_a, j.item_b] {
            if !counts.contains_key(&id) {
                return Err(RankError::UnknownItem(id));
            }
        }
        *counts.get_mut(&j.winner).expect("checked above") += 1.0;
    }
    RankingList::from_scores(counts, RankDirection::Descending)
}

fn recall_at(
    reference: &RankingList,
    candidate: &RankingList,
    k: usize,
    end: RankEnd,
) -> Result<f64, RankError> {
    let ref_universe: BTreeSet<ItemId> = reference.order.iter().copied().collect();
    let cand_universe: BTreeSet<ItemId> = candidate.order.iter().copied().collect();
    if ref_universe != cand_universe {
        return Err(RankError::UniverseMismatch);
    }
    if k == 0 || k > reference.len() {
        return Err(RankError::InvalidK {
            k,
            n: reference.len(),
        });
    }
    let hits = reference
        .end_set(k, end)
        .intersection(&candidate.end_set(k, end))
        .count();
    Ok(100.0 * hits as f64 / k as f64)
}

/// 100 x |top-k(reference) intersect top-k(candidate)| / k.
pub fn recall_at_top_k(
    reference: &RankingList,
    candidate: &RankingList,
    k: usize,
) -> Result<f64, RankError> {
    recall_at(reference, candidate, k, RankEnd::Top)
}

/// As top-k, on the last-k sets.
pub fn recall_at_bottom_k(
    reference: &RankingList,
    candidate: &RankingList,
    k: usize,
) -> Result<f64, RankError> {
    recall_at(reference, candidate, k, RankEnd::Bottom)
}

/// Arithmetic mean of the per-metric recalls against one reference.
pub fn averaged_recall(
    reference: &RankingList,
    candidates: &[RankingList],
    k: usize,
    end: RankEnd,
) -> Result<f64, RankError> {
    if candidates.is_empty() {
        return Err(RankError::EmptyMetricSet);
    }
    let mut total = 0.0;
    for candidate in candidates {
        total += recall_at(reference, candidate, k, end)?;
    }
    Ok(total / candidates.len() as f64)
}

/// Recall of one metric ranking against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecall {
    pub metric: String,
    pub direction: RankDirection,
    pub r_at_top_k: f64,
    pub r_at_bottom_k: f64,
}

/// Rank-alignment summary over a metric set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub k: usize,
    pub r_at_top_k: f64,
    pub r_at_bottom_k: f64,
    pub per_metric: Vec<MetricRecall>,
}

impl RecallReport {
    /// Averages the per-metric recalls; the metric set must be non-empty.
    pub fn from_metrics(k: usize, per_metric: Vec<MetricRecall>) -> Result<RecallReport, RankError> {
        if per_metric.is_empty() {
            return Err(RankError::EmptyMetricSet);
        }
        let n = per_metric.len() as f64;
        let top = per_metric.iter().map(|m| m.r_at_top_k).sum::<f64>() / n;
        let bottom = per_metric.iter().map(|m| m.r_at_bottom_k).sum::<f64>() / n;
        Ok(RecallReport {
            k,
            r_at_top_k: top,
            r_at_bottom_k: bottom,
            per_metric,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judgment(a: ItemId, b: ItemId, winner: ItemId) -> PairwiseJudgment {
        PairwiseJudgment::new(a, b, winner).unwrap()
    }

    #[test]
    fn sweeping_item_ranks_first_with_full_count() {
        let items = [1, 2, 3, 4];
        let judgments = vec![
            judgment(1, 2, 1),
            judgment(1, 3, 1),
            judgment(1, 4, 1),
            judgment(2, 3, 2),
            judgment(3, 4, 3),
            judgment(4, 2, 4),
        ];
        let ranking = wins_ranking(&judgments, &items).unwrap();
        assert_eq!(ranking.order(), &[1, 2, 3, 4]);
        assert_eq!(ranking.scores()[&1], 3.0);
        assert_eq!(ranking.tie_groups(), &[vec![2, 3, 4]]);
    }

    #[test]
    fn empty_judgments_tie_everything() {
        let ranking = wins_ranking(&[], &[7, 3, 5]).unwrap();
        assert_eq!(ranking.order(), &[3, 5, 7]);
        assert!(ranking.scores().values().all(|&s| s == 0.0));
        assert_eq!(ranking.tie_groups(), &[vec![3, 5, 7]]);
    }

    #[test]
    fn a_cycle_ties_all_counts_at_one() {
        let judgments = vec![judgment(1, 2, 1), judgment(2, 3, 2), judgment(3, 1, 3)];
        let ranking = wins_ranking(&judgments, &[1, 2, 3]).unwrap();
        assert_eq!(ranking.order(), &[1, 2, 3]);
        assert!(ranking.scores().values().all(|&s| s == 1.0));
        assert_eq!(ranking.tie_groups().len(), 1);
    }

    #[test]
    fn wins_ranking_ignores_judgment_order() {
        let items = [1, 2, 3];
        let mut judgments = vec![judgment(1, 2, 2), judgment(2, 3, 2), judgment(3, 1, 1)];
        let a = wins_ranking(&judgments, &items).unwrap();
        judgments.reverse();
        let b = wins_ranking(&judgments, &items).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(matches!(
            PairwiseJudgment::new(1, 1, 1).unwrap_err(),
            RankError::InvalidJudgment { .. }
        ));
        assert!(matches!(
            PairwiseJudgment::new(1, 2, 3).unwrap_err(),
            RankError::InvalidJudgment { .. }
        ));
        assert_eq!(
            wins_ranking(&[judgment(1, 9, 9)], &[1, 2]).unwrap_err(),
            RankError::UnknownItem(9)
        );
        assert_eq!(
            wins_ranking(&[], &[1, 1]).unwrap_err(),
            RankError::DuplicateItem(1)
        );
        assert_eq!(wins_ranking(&[], &[]).unwrap_err(), RankError::EmptyUniverse);
    }

    #[test]
    fn pair_count_matches_the_closed_form() {
        assert_eq!(pair_count(10), 45);
        assert_eq!(pair_count(2), 1);
        assert_eq!(pair_count(5), 10);
    }

    #[test]
    fn direction_controls_the_sort() {
        let scores: BTreeMap<ItemId, f64> = [(1, 0.1), (2, 0.4), (3, 0.2)].into();
        let asc = RankingList::from_scores(scores.clone(), RankDirection::Ascending).unwrap();
        assert_eq!(asc.order(), &[1, 3, 2]);
        let desc = RankingList::from_scores(scores, RankDirection::Descending).unwrap();
        assert_eq!(desc.order(), &[2, 3, 1]);
        assert!(desc.tie_groups().is_empty());
    }

    #[test]
    fn recall_extremes_and_granularity() {
        let reference = RankingList::from_order((0..10).collect()).unwrap();
        assert_eq!(recall_at_top_k(&reference, &reference, 5).unwrap(), 100.0);
        assert_eq!(recall_at_bottom_k(&reference, &reference, 5).unwrap(), 100.0);

        let reversed = RankingList::from_order((0..10).rev().collect()).unwrap();
        assert_eq!(recall_at_top_k(&reference, &reversed, 5).unwrap(), 0.0);
        assert_eq!(recall_at_bottom_k(&reference, &reversed, 5).unwrap(), 0.0);
        // top-n sets are both the whole universe
        assert_eq!(recall_at_top_k(&reference, &reversed, 10).unwrap(), 100.0);

        // swap two items across the top-5 boundary: intersection 4 of 5
        let swapped = RankingList::from_order(vec![0, 1, 2, 3, 5, 4, 6, 7, 8, 9]).unwrap();
        assert_eq!(recall_at_top_k(&reference, &swapped, 5).unwrap(), 80.0);
        assert_eq!(
            recall_at_top_k(&reference, &swapped, 5).unwrap(),
            recall_at_top_k(&swapped, &reference, 5).unwrap()
        );
    }

    #[test]
    fn recall_validates_universe_and_k() {
        let a = RankingList::from_order(vec![1, 2, 3]).unwrap();
        let b = RankingList::from_order(vec![1, 2, 4]).unwrap();
        assert_eq!(
            recall_at_top_k(&a, &b, 2).unwrap_err(),
            RankError::UniverseMismatch
        );
        assert_eq!(
            recall_at_top_k(&a, &a, 0).unwrap_err(),
            RankError::InvalidK { k: 0, n: 3 }
        );
        assert_eq!(
            recall_at_top_k(&a, &a, 4).unwrap_err(),
            RankError::InvalidK { k: 4, n: 3 }
        );
    }

    #[test]
    fn averaging_recalls_over_a_metric_set() {
        let reference = RankingList::from_order((0..10).collect()).unwrap();
        let same = reference.clone();
        let reversed = RankingList::from_order((0..10).rev().collect()).unwrap();
        assert_eq!(
            averaged_recall(&reference, std::slice::from_ref(&same), 5, RankEnd::Top).unwrap(),
            100.0
        );
        assert_eq!(
            averaged_recall(&reference, &[same, reversed], 5, RankEnd::Top).unwrap(),
            50.0
        );
        assert_eq!(
            averaged_recall(&reference, &[], 5, RankEnd::Top).unwrap_err(),
            RankError::EmptyMetricSet
        );
    }

    #[test]
    fn report_averages_per_metric_values() {
        let report = RecallReport::from_metrics(
            5,
            vec![
                MetricRecall {
                    metric: "sim".into(),
                    direction: RankDirection::Descending,
                    r_at_top_k: 100.0,
                    r_at_bottom_k: 80.0,
                },
                MetricRecall {
                    metric: "dist".into(),
                    direction: RankDirection::Ascending,
                    r_at_top_k: 0.0,
                    r_at_bottom_k: 40.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(report.r_at_top_k, 50.0);
        assert_eq!(report.r_at_bottom_k, 60.0);
        assert!(RecallReport::from_metrics(5, vec![]).is_err());
    }
}
