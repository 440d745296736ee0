//! Property tests for ranking alignment: recall granularity and bounds,
//! top/bottom duality under reversal, and judgment-order invariance.

use proptest::prelude::*;
use s2m_core::rankeval::{
    pair_count, recall_at_bottom_k, recall_at_top_k, wins_ranking, PairwiseJudgment, RankingList,
};

fn permutation(n: usize, swaps: &[(usize, usize)]) -> Vec<u64> {
    let mut order: Vec<u64> = (0..n as u64).collect();
    for &(a, b) in swaps {
        order.swap(a % n, b % n);
    }
    order
}

fn swap_list() -> impl Strategy<Value = Vec<(usize, usize)>> {
    proptest::collection::vec((0usize..64, 0usize..64), 0..32)
}

proptest! {
    #[test]
    fn prop_recall_is_bounded_and_quantized(
        n in 2usize..12,
        ref_swaps in swap_list(),
        cand_swaps in swap_list(),
        k_frac in 0.0f64..1.0,
    ) {
        let reference = RankingList::from_order(permutation(n, &ref_swaps)).unwrap();
        let candidate = RankingList::from_order(permutation(n, &cand_swaps)).unwrap();
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        for r in [
            recall_at_top_k(&reference, &candidate, k).unwrap(),
            recall_at_bottom_k(&reference, &candidate, k).unwrap(),
        ] {
            prop_assert!((0.0..=100.0).contains(&r));
            // always a multiple of 100/k
            let steps = r * k as f64 / 100.0;
            prop_assert!((steps - steps.round()).abs() <= 1e-9, "r = {}, k = {}", r, k);
        }
    }

    #[test]
    fn prop_full_depth_recall_is_total(
        n in 2usize..12,
        ref_swaps in swap_list(),
        cand_swaps in swap_list(),
    ) {
        let reference = RankingList::from_order(permutation(n, &ref_swaps)).unwrap();
        let candidate = RankingList::from_order(permutation(n, &cand_swaps)).unwrap();
        prop_assert_eq!(recall_at_top_k(&reference, &candidate, n).unwrap(), 100.0);
        prop_assert_eq!(recall_at_bottom_k(&reference, &candidate, n).unwrap(), 100.0);
    }

    #[test]
    fn prop_reversing_both_orders_swaps_top_and_bottom(
        n in 2usize..12,
        ref_swaps in swap_list(),
        cand_swaps in swap_list(),
        k_frac in 0.0f64..1.0,
    ) {
        let ref_order = permutation(n, &ref_swaps);
        let cand_order = permutation(n, &cand_swaps);
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let top = recall_at_top_k(
            &RankingList::from_order(ref_order.clone()).unwrap(),
            &RankingList::from_order(cand_order.clone()).unwrap(),
            k,
        )
        .unwrap();
        let bottom = recall_at_bottom_k(
            &RankingList::from_order(ref_order.into_iter().rev().collect()).unwrap(),
            &RankingList::from_order(cand_order.into_iter().rev().collect()).unwrap(),
            k,
        )
        .unwrap();
        prop_assert_eq!(top, bottom);
    }

    #[test]
    fn prop_win_counts_ignore_judgment_order(
        n in 3usize..8,
        winner_bits in proptest::collection::vec(any::<bool>(), 28),
        rotate in 0usize..28,
    ) {
        let items: Vec<u64> = (0..n as u64).collect();
        let mut judgments = Vec::new();
        let mut bit = winner_bits.iter().cycle();
        for a in 0..n as u64 {
            for b in a + 1..n as u64 {
                let winner = if *bit.next().unwrap() { a } else { b };
                judgments.push(PairwiseJudgment::new(a, b, winner).unwrap());
            }
        }
        prop_assert_eq!(judgments.len(), pair_count(n));
        let baseline = wins_ranking(&judgments, &items).unwrap();
        let len = judgments.len();
        judgments.rotate_left(rotate % len);
        let rotated = wins_ranking(&judgments, &items).unwrap();
        prop_assert_eq!(baseline.order(), rotated.order());
        prop_assert_eq!(baseline.tie_groups(), rotated.tie_groups());
    }
}
