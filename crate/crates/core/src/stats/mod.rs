//! Wilcoxon rank-sum with the common-language effect size, and Fleiss' kappa.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::ArgumentError;
use crate::model::NliLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    pub u_statistic: f64,
    pub z_score: f64,
    pub p_value: f64,
    /// `U_a / (n_a * n_b)`, i.e. `P(a > b) + P(a = b) / 2`.
    pub rho: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Midranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided rank-sum test with tie-corrected normal approximation and continuity correction.
pub fn rank_sum(group_a: &[f64], group_b: &[f64]) -> Result<RankSumResult, ArgumentError> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(ArgumentError("rank-sum needs two non-empty groups".into()));
    }
    if group_a.iter().chain(group_b).any(|v| v.is_nan()) {
        return Err(ArgumentError("rank-sum input contains NaN".into()));
    }
    let (n_a, n_b) = (group_a.len(), group_b.len());
    let all: Vec<f64> = group_a.iter().chain(group_b).copied().collect();
    let ranks = midranks(&all);
    let r_a: f64 = ranks[..n_a].iter().sum();
    let u = r_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let nn = (n_a * n_b) as f64;
    let n = (n_a + n_b) as f64;

    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let variance = if n > 1.0 { nn / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0))) } else { 0.0 };
    let mean = nn / 2.0;
    let (z, p) = if variance <= 0.0 {
        (0.0, 1.0)
    } else {
        let diff = u - mean;
        let corrected = (diff.abs() - 0.5).max(0.0) * diff.signum();
        let z = corrected / variance.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (z, (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0))
    };
    Ok(RankSumResult { u_statistic: u, z_score: z, p_value: p, rho: u / nn, n_a, n_b })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub kappa: f64,
    /// Mean observed per-item agreement.
    pub p_bar: f64,
    /// Chance agreement.
    pub p_e: f64,
    /// Share of all ratings falling in each category.
    pub marginals: Vec<f64>,
}

/// Fleiss' kappa over an items x categories count matrix.
pub fn fleiss_kappa(ratings: &[Vec<u32>], raters_per_item: u32) -> Result<KappaResult, ArgumentError> {
    if raters_per_item < 2 {
        return Err(ArgumentError("Fleiss' kappa needs at least two raters per item".into()));
    }
    if ratings.is_empty() {
        return Err(ArgumentError("Fleiss' kappa needs at least one item".into()));
    }
    let k = ratings[0].len();
    if k == 0 {
        return Err(ArgumentError("Fleiss' kappa needs at least one category".into()));
    }
    for (i, row) in ratings.iter().enumerate() {
        if row.len() != k {
            return Err(ArgumentError(format!("item {i} has {} categories, expected {k}", row.len())));
        }
        let sum: u32 = row.iter().sum();
        if sum != raters_per_item {
            return Err(ArgumentError(format!("item {i} has {sum} ratings, expected {raters_per_item}")));
        }
    }
    let n = raters_per_item as f64;
    let items = ratings.len() as f64;
    let p_bar = ratings
        .iter()
        .map(|row| (row.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() - n) / (n * (n - 1.0)))
        .sum::<f64>()
        / items;
    let marginals: Vec<f64> =
        (0..k).map(|j| ratings.iter().map(|row| row[j] as f64).sum::<f64>() / (items * n)).collect();
    let p_e: f64 = marginals.iter().map(|p| p * p).sum();
    let kappa = if (1.0 - p_e).abs() < 1e-15 { 1.0 } else { (p_bar - p_e) / (1.0 - p_e) };
    Ok(KappaResult { kappa, p_bar, p_e, marginals })
}

/// Kappa from per-item label lists; every item must have the same number of labels.
pub fn fleiss_kappa_from_labels(items: &[Vec<NliLabel>]) -> Result<KappaResult, ArgumentError> {
    let raters = items.first().map_or(0, Vec::len);
    let mut matrix = Vec::with_capacity(items.len());
    for (i, labels) in items.iter().enumerate() {
        if labels.len() != raters {
            return Err(ArgumentError(format!("item {i} has {} labels, expected {raters}", labels.len())));
        }
        let mut row = vec![0u32; 3];
        for l in labels {
            row[l.index()] += 1;
        }
        matrix.push(row);
    }
    fleiss_kappa(&matrix, raters as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal as Gauss};

    #[test]
    fn rank_sum_examples() {
        let same = rank_sum(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(same.rho, 0.5);
        let sep = rank_sum(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sep.rho, 1.0);
        assert_eq!(sep.u_statistic, 9.0);
        assert!(rank_sum(&[], &[1.0]).is_err());
        let flat = rank_sum(&[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((flat.p_value, flat.rho, flat.z_score), (1.0, 0.5, 0.0));
    }

    #[test]
    fn p_value_against_known_case() {
        // U = 9 of 9, mean 4.5, variance 5.25 → z = (4.5 - 0.5)/sqrt(5.25)
        let r = rank_sum(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(r.z_score, 4.0 / 5.25f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 0.080856, epsilon = 1e-5);
    }

    #[test]
    fn gaussian_separation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2023);
        let a: Vec<f64> = Gauss::new(1.0, 1.0).unwrap().sample_iter(&mut rng).take(500).collect();
        let b: Vec<f64> = Gauss::new(0.0, 1.0).unwrap().sample_iter(&mut rng).take(500).collect();
        let rho = rank_sum(&a, &b).unwrap().rho;
        let expected = Normal::new(0.0, 1.0).unwrap().cdf(1.0 / 2f64.sqrt());
        assert!((rho - expected).abs() <= 0.04, "{rho} vs {expected}");
    }

    fn pair_count(a: &[f64], b: &[f64]) -> f64 {
        let mut u = 0.0;
        for x in a {
            for y in b {
                if x > y {
                    u += 1.0;
                } else if x == y {
                    u += 0.5;
                }
            }
        }
        u
    }

    fn group() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0u8..12).prop_map(|v| v as f64 / 2.0), 1..60)
    }

    proptest! {
        #[test]
        fn u_matches_pair_counting(a in group(), b in group()) {
            let r = rank_sum(&a, &b).unwrap();
            prop_assert_eq!(r.u_statistic, pair_count(&a, &b));
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            let flipped = rank_sum(&b, &a).unwrap();
            prop_assert!((r.rho + flipped.rho - 1.0).abs() < 1e-12);
            let cubed: (Vec<f64>, Vec<f64>) = (a.iter().map(|x| x * x * x + 3.0).collect(), b.iter().map(|x| x * x * x + 3.0).collect());
            prop_assert_eq!(rank_sum(&cubed.0, &cubed.1).unwrap().rho, r.rho);
        }
    }

    #[test]
    fn kappa_examples() {
        let unanimous = vec![vec![3, 0, 0], vec![0, 3, 0], vec![0, 0, 3]];
        assert_eq!(fleiss_kappa(&unanimous, 3).unwrap().kappa, 1.0);
        let single_category = vec![vec![3, 0, 0]; 4];
        assert_eq!(fleiss_kappa(&single_category, 3).unwrap().kappa, 1.0);
        let balanced = vec![vec![2, 0], vec![0, 2], vec![1, 1], vec![1, 1]];
        let r = fleiss_kappa(&balanced, 2).unwrap();
        assert_abs_diff_eq!(r.p_bar, r.p_e, epsilon = 1e-12);
        assert_abs_diff_eq!(r.kappa, 0.0, epsilon = 1e-12);
        assert!(fleiss_kappa(&[vec![2, 0]], 3).is_err());
        assert!(fleiss_kappa(&[vec![1, 0]], 1).is_err());
    }

    #[test]
    fn kappa_matches_textbook_example() {
        // Fleiss (1971)-style worked example as reproduced on Wikipedia: 10 items, 14 raters, κ ≈ 0.210.
        let m = vec![
            vec![0, 0, 0, 0, 14],
            vec![0, 2, 6, 4, 2],
            vec![0, 0, 3, 5, 6],
            vec![0, 3, 9, 2, 0],
            vec![2, 2, 8, 1, 1],
            vec![7, 7, 0, 0, 0],
            vec![3, 2, 6, 3, 0],
            vec![2, 5, 3, 2, 2],
            vec![6, 5, 2, 1, 0],
            vec![0, 2, 2, 3, 7],
        ];
        assert_abs_diff_eq!(fleiss_kappa(&m, 14).unwrap().kappa, 0.210, epsilon = 1e-3);
    }

    #[test]
    fn random_ratings_are_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let items: Vec<Vec<NliLabel>> =
            (0..300).map(|_| (0..3).map(|_| NliLabel::ALL[rng.gen_range(0..3)]).collect()).collect();
        let k = fleiss_kappa_from_labels(&items).unwrap().kappa;
        assert!(k.abs() <= 0.05, "{k}");
    }
}
