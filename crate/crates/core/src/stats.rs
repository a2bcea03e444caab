//! Small statistics helpers shared by the Monte-Carlo estimators.

/// Pairwise summation in a fixed order, so the result does not depend on how
/// the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Binomial proportion with its plug-in standard error.
pub fn proportion(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = successes as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Wilson score interval at `z` standard deviations.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Hill estimate of the tail exponent from the largest `fraction` of positive
/// summands. Returns `None` when fewer than two order statistics are usable.
pub fn hill_tail_exponent(values: &[f64], fraction: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    if v.len() < 20 {
        return None;
    }
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = ((fraction * v.len() as f64).ceil() as usize).clamp(2, v.len() - 1);
    let threshold = v[k];
    if threshold <= 0.0 {
        return None;
    }
    let gamma = v[..k].iter().map(|x| (x / threshold).ln()).sum::<f64>() / k as f64;
    if gamma <= 0.0 {
        return Some(f64::INFINITY);
    }
    Some(1.0 / gamma)
}

/// Least-squares nondecreasing fit (pool-adjacent-violators) with weights.
pub fn isotonic_nondecreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (weighted mean, total weight, count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, c2) = blocks[blocks.len() - 1];
            let (m1, w1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, c1 + c2));
        }
    }
    blocks.into_iter().flat_map(|(m, _, c)| std::iter::repeat_n(m, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_and_stderr_of_constant() {
        let (m, s) = mean_stderr(&[2.0; 10]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn wilson_contains_proportion() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(lo > 0.2 && hi < 0.4);
    }

    #[test]
    fn hill_recovers_pareto_exponent() {
        // quantiles of a Pareto(alpha = 2) law on a regular grid
        let n = 20_000;
        let v: Vec<f64> = (1..=n).map(|i| (i as f64 / (n + 1) as f64).powf(-0.5)).collect();
        let a = hill_tail_exponent(&v, 0.01).unwrap();
        assert!((a - 2.0).abs() < 0.1, "{a}");
    }

    #[test]
    fn isotonic_pools_violators() {
        let fit = isotonic_nondecreasing(&[1.0, 3.0, 2.0, 4.0], &[1.0; 4]);
        assert_eq!(fit, vec![1.0, 2.5, 2.5, 4.0]);
    }

    proptest! {
        #[test]
        fn isotonic_is_monotone_and_mean_preserving(v in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
            let w = vec![1.0; v.len()];
            let fit = isotonic_nondecreasing(&v, &w);
            prop_assert!(fit.windows(2).all(|p| p[0] <= p[1] + 1e-12));
            let s1: f64 = v.iter().sum();
            let s2: f64 = fit.iter().sum();
            prop_assert!((s1 - s2).abs() < 1e-9);
        }

        #[test]
        fn pairwise_matches_naive(v in proptest::collection::vec(-1e3f64..1e3, 0..300)) {
            let naive: f64 = v.iter().sum();
            prop_assert!((pairwise_sum(&v) - naive).abs() < 1e-8);
        }
    }
}
