//! Small numerical and statistical helpers shared by the estimators.

use rand::Rng;

use crate::rng::SpinRng;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Mean and its standard error for independent samples.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let se = (sample_variance(xs) / xs.len() as f64).sqrt();
    (mean(xs), se)
}

/// Mean, standard error and effective sample size from `batches` batch means.
/// Suitable for autocorrelated chains.
pub fn batch_means(xs: &[f64], batches: usize) -> (f64, f64, f64) {
    let batches = batches.clamp(2, xs.len().max(2));
    let size = xs.len() / batches;
    if size == 0 {
        let (m, se) = mean_se(xs);
        return (m, se, xs.len() as f64);
    }
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * size..(b + 1) * size])).collect();
    let m = mean(&means);
    let se = (sample_variance(&means) / batches as f64).sqrt();
    let var = sample_variance(xs);
    let ess = if se > 0.0 { (var / (se * se)).min(xs.len() as f64) } else { xs.len() as f64 };
    (m, se, ess)
}

/// Pearson correlation; 0 when either side is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Weighted mean and variance of `values` under probabilities `weights`.
pub fn weighted_moments(weights: &[f64], values: &[f64]) -> (f64, f64) {
    let m: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum();
    let var: f64 = weights.iter().zip(values).map(|(w, v)| w * (v - m) * (v - m)).sum();
    (m, var.max(0.0))
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Shannon entropy in bits.
/// Neumaier-compensated sum; used where large nearly cancelling totals are compared.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

pub fn entropy_bits(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>()
}

/// Total-variation distance between two distributions on the same index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Result of the one-way random-effects ANOVA on equally sized groups.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anova {
    pub between_ms: f64,
    pub within_ms: f64,
    pub group_size: usize,
}

impl Anova {
    /// Between-group variance component `(MSB − MSW)/m`, floored at 0.
    pub fn between_component(&self) -> f64 {
        ((self.between_ms - self.within_ms) / self.group_size as f64).max(0.0)
    }

    /// Fraction of the total variance carried by the group means, in `[0, 1]`.
    pub fn explained_fraction(&self) -> f64 {
        let tau = self.between_component();
        let total = tau + self.within_ms;
        if total <= 0.0 {
            0.0
        } else {
            (tau / total).clamp(0.0, 1.0)
        }
    }
}

/// One-way ANOVA; every group must hold the same number `m ≥ 2` of samples.
pub fn anova(groups: &[Vec<f64>]) -> Anova {
    let g = groups.len();
    let m = groups[0].len();
    debug_assert!(groups.iter().all(|x| x.len() == m));
    let means: Vec<f64> = groups.iter().map(|x| mean(x)).collect();
    let grand = mean(&means);
    let between_ms = if g > 1 {
        m as f64 * means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / (g - 1) as f64
    } else {
        0.0
    };
    let within_ss: f64 = groups
        .iter()
        .zip(&means)
        .map(|(x, mu)| x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>())
        .sum();
    let within_ms = within_ss / (g * (m - 1)) as f64;
    Anova { between_ms, within_ms, group_size: m }
}

/// Bootstrap standard error of `stat` by resampling whole groups.
pub fn bootstrap_groups_se<F>(groups: &[Vec<f64>], replicates: usize, rng: &mut SpinRng, stat: F) -> f64
where
    F: Fn(&[Vec<f64>]) -> f64,
{
    let g = groups.len();
    if g < 2 || replicates < 2 {
        return f64::NAN;
    }
    let mut values = Vec::with_capacity(replicates);
    let mut resampled: Vec<Vec<f64>> = Vec::with_capacity(g);
    for _ in 0..replicates {
        resampled.clear();
        for _ in 0..g {
            resampled.push(groups[rng.gen_range(0..g)].clone());
        }
        values.push(stat(&resampled));
    }
    sample_variance(&values).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_and_binomial() {
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn anova_recovers_components() {
        // group means 0 and 2, within spread ±1: MSB = 2·(1+1)/1 = 4, MSW = 1·4/(2·1) = 2
        let groups = vec![vec![-1.0, 1.0], vec![1.0, 3.0]];
        let a = anova(&groups);
        assert!((a.between_ms - 4.0).abs() < 1e-12);
        assert!((a.within_ms - 2.0).abs() < 1e-12);
        assert!((a.between_component() - 1.0).abs() < 1e-12);
        assert!((a.explained_fraction() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_basics() {
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert_eq!(correlation(&[1.0, 1.0], &[0.0, 1.0]), 0.0);
    }
}
