//! Brute-force discounted cumulative gain.

/// DCG of the first `k` gains in ranked order, discount `log2(position + 1)`
/// with positions starting at 1.
pub fn dcg(ranked_gains: &[f64], k: usize) -> f64 {
    ranked_gains
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG at `k`: DCG of the ranking divided by the DCG of the ideal ordering
/// of `pool_gains`. Zero when the ideal DCG is zero.
pub fn ndcg(ranked_gains: &[f64], pool_gains: &[f64], k: usize) -> f64 {
    let mut ideal: Vec<f64> = pool_gains.to_vec();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let denom = dcg(&ideal, k);
    if denom == 0.0 {
        return 0.0;
    }
    dcg(ranked_gains, k) / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_three_item_example() {
        // Pool gains 3, 2, 1; ranking puts the gain-2 item first.
        let ranked = [2.0, 3.0, 1.0];
        let pool = [3.0, 2.0, 1.0];
        let got = ndcg(&ranked, &pool, 10);
        let expect = 4.392789260714372 / 4.7618595071429155;
        assert!((got - expect).abs() < 1e-15, "{got}");
    }

    #[test]
    fn perfect_ranking_scores_one() {
        let ranked = [5.0, 3.0, 1.0, 0.0];
        assert!((ndcg(&ranked, &ranked, 10) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn all_zero_gains_score_zero() {
        assert_eq!(ndcg(&[0.0, 0.0], &[0.0, 0.0], 10), 0.0);
    }
}
