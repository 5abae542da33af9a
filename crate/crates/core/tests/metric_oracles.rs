use std::collections::HashSet;

use ctxrec::metrics::{ndcg_at_n, precision_recall_at_n, RankedList};
use proptest::prelude::*;

/// Independent ranking: full stable sort by (score desc, id asc).
fn oracle_rank(scores: &[(u32, f64)], n: usize) -> Vec<u32> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    v.into_iter().take(n).map(|(t, _)| t).collect()
}

fn oracle_dcg(ranked: &[u32], relevant: &HashSet<u32>) -> f64 {
    let mut dcg = 0.0;
    for (p, t) in ranked.iter().enumerate() {
        if relevant.contains(t) {
            dcg += 1.0 / (p as f64 + 2.0).log2();
        }
    }
    dcg
}

fn oracle_ndcg(ranked: &[u32], relevant: &HashSet<u32>, n: usize) -> f64 {
    let ideal_hits = relevant.len().min(n);
    let mut idcg = 0.0;
    for p in 0..ideal_hits {
        idcg += 1.0 / (p as f64 + 2.0).log2();
    }
    if idcg == 0.0 {
        0.0
    } else {
        oracle_dcg(ranked, relevant) / idcg
    }
}

/// Distinct item ids with integer-valued scores, so ties are common.
fn instance() -> impl Strategy<Value = (Vec<(u32, f64)>, HashSet<u32>, usize)> {
    (1usize..40).prop_flat_map(|len| {
        (
            proptest::collection::vec(0u8..6, len),
            proptest::collection::hash_set(0u32..len as u32, 0..=len),
            1usize..15,
        )
            .prop_map(|(scores, rel, n)| {
                let scored = scores.into_iter().enumerate().map(|(i, s)| (i as u32, s as f64)).collect();
                (scored, rel, n)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_match_brute_force((scores, relevant, n) in instance()) {
        let ranked = RankedList::from_scores(scores.clone(), n);
        let expect = oracle_rank(&scores, n);
        prop_assert_eq!(ranked.items().collect::<Vec<_>>(), expect.clone());

        let hits = expect.iter().filter(|t| relevant.contains(t)).count() as f64;
        let (p, r) = precision_recall_at_n(&ranked, &relevant);
        let p_want = if expect.is_empty() { 0.0 } else { hits / expect.len() as f64 };
        let r_want = if relevant.is_empty() { 0.0 } else { hits / relevant.len() as f64 };
        prop_assert!((p - p_want).abs() <= 1e-9);
        prop_assert!((r - r_want).abs() <= 1e-9);

        let g = ndcg_at_n(&ranked, &relevant);
        prop_assert!((g - oracle_ndcg(&expect, &relevant, n)).abs() <= 1e-9);
        for m in [p, r, g] {
            prop_assert!((0.0..=1.0).contains(&m));
        }
    }

    #[test]
    fn hit_count_identity((scores, relevant, n) in instance()) {
        let ranked = RankedList::from_scores(scores, n);
        let (p, r) = precision_recall_at_n(&ranked, &relevant);
        let hits = ranked.items().filter(|t| relevant.contains(t)).count() as f64;
        prop_assert!((p * ranked.len() as f64 - hits).abs() <= 1e-9);
        prop_assert!((r * relevant.len() as f64 - hits).abs() <= 1e-9);
    }

    #[test]
    fn no_permutation_beats_ideal(
        items in Just((0u32..12).collect::<Vec<_>>()).prop_shuffle(),
        relevant in proptest::collection::hash_set(0u32..12, 1..12),
        n in 1usize..12,
    ) {
        let got = ndcg_at_n(&RankedList::from_ordered(&items, n), &relevant);
        let mut ideal: Vec<u32> = relevant.iter().copied().collect();
        ideal.sort_unstable();
        ideal.extend(items.iter().filter(|t| !relevant.contains(t)));
        let best = ndcg_at_n(&RankedList::from_ordered(&ideal, n), &relevant);
        prop_assert!((best - 1.0).abs() <= 1e-12);
        prop_assert!(got <= best + 1e-12);
    }
}

#[test]
fn relevant_item_at_rank_two() {
    let ranked = RankedList::from_ordered(&[7, 3, 9], 10);
    let g = ndcg_at_n(&ranked, &HashSet::from([3]));
    assert_eq!(format!("{g:.4}"), "0.6309");
}
