//! Top-N ranking metrics with binary relevance.

use std::cmp::Ordering;
use std::collections::HashSet;

/// Items ordered by non-increasing score; equal scores by ascending item id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    cutoff: usize,
    entries: Vec<(u32, f64)>,
}

impl RankedList {
    /// Sorts `scored` and keeps the best `cutoff` entries. NaN scores rank last.
    pub fn from_scores(mut scored: Vec<(u32, f64)>, cutoff: usize) -> Self {
        scored.sort_by(rank_order);
        scored.truncate(cutoff);
        RankedList {
            cutoff,
            entries: scored,
        }
    }

    /// Takes an already-ordered list as is (used for metric oracles and
    /// permutation tests).
    pub fn from_ordered(items: &[u32], cutoff: usize) -> Self {
        let n = items.len().min(cutoff);
        RankedList {
            cutoff,
            entries: items[..n]
                .iter()
                .enumerate()
                .map(|(i, &t)| (t, (n - i) as f64))
                .collect(),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn items(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(t, _)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) fn rank_order(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    key(b.1)
        .partial_cmp(&key(a.1))
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

fn hits(ranked: &RankedList, relevant: &HashSet<u32>) -> usize {
    ranked.items().filter(|t| relevant.contains(t)).count()
}

/// `(hits / |ranked|, hits / |relevant|)`, each 0 when its denominator is.
pub fn precision_recall_at_n(ranked: &RankedList, relevant: &HashSet<u32>) -> (f64, f64) {
    let h = hits(ranked, relevant) as f64;
    let precision = if ranked.is_empty() { 0.0 } else { h / ranked.len() as f64 };
    let recall = if relevant.is_empty() { 0.0 } else { h / relevant.len() as f64 };
    (precision, recall)
}

/// Binary-gain NDCG with `log2(p + 1)` discounts. The ideal list holds
/// `min(|relevant|, cutoff)` hits.
pub fn ndcg_at_n(ranked: &RankedList, relevant: &HashSet<u32>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let dcg: f64 = ranked
        .items()
        .enumerate()
        .filter(|(_, t)| relevant.contains(t))
        .map(|(i, _)| discount(i))
        .sum();
    let ideal: f64 = (0..relevant.len().min(ranked.cutoff())).map(discount).sum();
    if ideal == 0.0 {
        0.0
    } else {
        dcg / ideal
    }
}

fn discount(position0: usize) -> f64 {
    1.0 / ((position0 + 2) as f64).log2()
}
