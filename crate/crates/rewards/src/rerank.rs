//! Best-of-N candidate reranking by total intrinsic reward.

use crate::aggregate::RewardBundle;

/// Stable descending sort by total reward; ties break by candidate seed
/// ascending so results are deterministic and order-independent.
pub fn rerank_best_of_n<T>(
    candidates: Vec<(T, u64)>,
    reward_fn: impl Fn(&T) -> RewardBundle,
) -> Vec<(T, u64, RewardBundle)> {
    let mut scored: Vec<(T, u64, RewardBundle)> = candidates
        .into_iter()
        .map(|(c, seed)| {
            let r = reward_fn(&c);
            (c, seed, r)
        })
        .collect();
    scored.sort_by(|a, b| {
        b.2.total
            .partial_cmp(&a.2.total)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    scored
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::aggregate;

    #[test]
    fn sorts_descending() {
        let cands = vec![(0.2f64, 0u64), (0.9, 1), (0.5, 2)];
        let out = rerank_best_of_n(cands, |&v| aggregate(v, v, v));
        let order: Vec<u64> = out.iter().map(|(_, s, _)| *s).collect();
        assert_eq!(order, vec![1, 2, 0]);
    }

    #[test]
    fn single_candidate_returned() {
        let out = rerank_best_of_n(vec![(0.4f64, 7u64)], |&v| aggregate(v, v, v));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1, 7);
    }

    #[test]
    fn ties_break_by_seed_ascending() {
        let cands = vec![(0.5f64, 7u64), (0.5, 3)];
        let out = rerank_best_of_n(cands, |&v| aggregate(v, v, v));
        assert_eq!(out[0].1, 3);
        assert_eq!(out[1].1, 7);
    }
}
