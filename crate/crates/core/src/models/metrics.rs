use super::ModelError;

/// Area under the ROC curve via the Mann-Whitney U statistic; tied scores
/// count one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, ModelError> {
    if scores.len() != labels.len() {
        return Err(ModelError::DimensionMismatch(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(ModelError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of average ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += rank * pos_in_tie as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            if labels[i] != 1 {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] != 0 {
                    continue;
                }
                den += 1.0;
                num += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
        num / den
    }

    #[test]
    fn worked_examples() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.5, 0.7], &[1, 1]), Err(ModelError::SingleClass));
    }

    #[test]
    fn matches_pairwise_oracle_and_negation_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(2..80);
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 * 0.25).collect();
            let auc = roc_auc(&scores, &labels).unwrap();
            assert!((auc - pairwise(&scores, &labels)).abs() < 1e-12);
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            assert!((auc - (1.0 - roc_auc(&neg, &labels).unwrap())).abs() < 1e-12);
        }
    }
}
