//! Small descriptive statistics and Kolmogorov–Smirnov helpers.

/// Sample mean.
pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn stderr(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Sample skewness (biased moment estimator).
pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Standard error of the sample variance, from the fourth central moment:
/// `Var(s^2) ~ (m4 - s^4) / n`.
pub fn variance_stderr(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2) / n).max(0.0).sqrt()
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `sup |F_n - F|` for a sample against a continuous distribution function.
pub fn ks_distance<F: Fn(f64) -> f64>(x: &[f64], cdf: F) -> f64 {
    let s = sorted(x);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov critical value `c(alpha)` (e.g. 1.628 at 1%).
pub fn ks_critical(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

/// One-sample band half-width at level `alpha` for `n` draws.
pub fn ks_band(alpha: f64, n: usize) -> f64 {
    ks_critical(alpha) / (n as f64).sqrt()
}

/// Two-sample critical distance at level `alpha`.
pub fn ks_two_sample_band(alpha: f64, n: usize, m: usize) -> f64 {
    ks_critical(alpha) * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Type-7 empirical quantile.
pub fn quantile(x: &[f64], p: f64) -> f64 {
    let s = sorted(x);
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&x), 2.5);
        assert!((variance(&x) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(skewness(&x), 0.0);
        assert_eq!(quantile(&x, 0.5), 2.5);
        assert!((ks_critical(0.01) - 1.627_58).abs() < 1e-4);
    }

    #[test]
    fn ks_statistics() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        assert!(ks_distance(&a, |x| x.clamp(0.0, 1.0)) <= 0.01 + 1e-12);
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        assert!(ks_two_sample(&a, &b) == 1.0);
    }
}
