//! Streaming moments, goodness-of-fit statistics and trend verdicts.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Welford accumulator for mean and variance, mergeable pairwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::new();
        iter.into_iter().for_each(|x| w.push(x));
        w
    }
}

/// Mean and standard error of a slice.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let w: Welford = xs.iter().copied().collect();
    (w.mean(), w.stderr())
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1) as f64
}

/// Sample variance with its standard error under a fourth-moment estimate.
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (m, _) = mean_stderr(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    let se = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    (var, se)
}

/// Mean, unbiased variance and sample skewness.
pub fn moments3(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
    (m, m2 * n / (n - 1.0).max(1.0), skew)
}

/// `log(sum(exp(x)))` without overflow; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log(mean(exp(x)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Kolmogorov-Smirnov distance between the sample and `N(mean, sd^2)`.
pub fn ks_normal(samples: &[f64], mean: f64, sd: f64) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len() as f64;
    if sd <= 0.0 {
        return ks_point_mass(&x, mean);
    }
    let dist = Normal::new(mean, sd).expect("positive sd");
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = dist.cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov-Smirnov distance between the sample and a point mass at `at`.
pub fn ks_point_mass(samples: &[f64], at: f64) -> f64 {
    let n = samples.len() as f64;
    let below = samples.iter().filter(|&&v| v < at).count() as f64;
    let at_or_below = samples.iter().filter(|&&v| v <= at).count() as f64;
    (below / n).max(1.0 - at_or_below / n)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rx = ranks(xs);
    let ry = ranks(ys);
    let c = covariance(&rx, &ry);
    let vx = covariance(&rx, &rx);
    let vy = covariance(&ry, &ry);
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        c / (vx * vy).sqrt()
    }
}

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    LinearFit {
        slope,
        intercept,
        slope_se,
    }
}

/// Direction of a ladder trend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Outcome of a monotone-trend test across an ordered ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub direction: Direction,
    pub spearman: f64,
    /// Every consecutive step moves the right way up to `slack` combined SE.
    pub monotone: bool,
    pub slack: f64,
}

/// Monotone trend of `values[i] = (estimate, stderr)` along the ladder order.
pub fn trend(values: &[(f64, f64)], direction: Direction, slack: f64) -> TrendVerdict {
    let sign = match direction {
        Direction::Increasing => 1.0,
        Direction::Decreasing => -1.0,
    };
    let monotone = values.windows(2).all(|w| {
        let (a, sa) = w[0];
        let (b, sb) = w[1];
        sign * (b - a) > -slack * (sa * sa + sb * sb).sqrt()
    });
    let pos: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
    let est: Vec<f64> = values.iter().map(|v| v.0).collect();
    TrendVerdict {
        direction,
        spearman: spearman(&pos, &est),
        monotone,
        slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Welford = xs.iter().copied().collect();
        let m = xs.iter().sum::<f64>() / 100.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 99.0;
        assert!((w.mean() - m).abs() < 1e-15);
        assert!((w.variance() - v).abs() < 1e-14);
    }

    #[test]
    fn welford_merge_is_consistent() {
        let xs: Vec<f64> = (0..57).map(|i| (i as f64).sqrt()).collect();
        let full: Welford = xs.iter().copied().collect();
        let mut a: Welford = xs[..20].iter().copied().collect();
        let b: Welford = xs[20..].iter().copied().collect();
        a.merge(&b);
        assert_eq!(a.count(), full.count());
        assert!((a.mean() - full.mean()).abs() < 1e-13);
        assert!((a.variance() - full.variance()).abs() < 1e-12);
    }

    #[test]
    fn lse_is_stable() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_mean_exp(&[0.0, 0.0, 0.0]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn ks_of_quantiles_is_small() {
        let dist = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..1000).map(|i| dist.inverse_cdf((i as f64 + 0.5) / 1000.0)).collect();
        assert!(ks_normal(&xs, 0.0, 1.0) <= 0.0005 + 1e-9);
        assert!(ks_normal(&xs, 1.0, 1.0) > 0.3);
    }

    #[test]
    fn ks_point_mass_degenerate() {
        assert_eq!(ks_point_mass(&[0.0; 10], 0.0), 0.0);
        assert_eq!(ks_point_mass(&[1.0; 10], 0.0), 1.0);
    }

    #[test]
    fn spearman_of_monotone_is_one() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_fit_exact_line() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trend_uses_slack() {
        let v = [(1.0, 0.1), (0.95, 0.1), (1.5, 0.1)];
        assert!(trend(&v, Direction::Increasing, 2.0).monotone);
        assert!(!trend(&v, Direction::Increasing, 0.0).monotone);
    }
}
