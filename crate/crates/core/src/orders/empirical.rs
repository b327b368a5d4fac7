//! Monte-Carlo test of `E f(X) <= E f(Y)` over a finite family.

use super::function::TestFunction;
use super::FunctionClass;
use crate::error::{invalid, Result};
use crate::sample::SampleMatrix;
use crate::special::{norm_cdf, norm_quantile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Slack allowed below zero before a lower confidence bound counts as
/// evidence against the order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    /// A fixed absolute slack, shared by all functions.
    Absolute(f64),
    /// This fraction of the pooled standard deviation of `f(X)` and `f(Y)`,
    /// computed per function.
    PooledSdFraction(f64),
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::PooledSdFraction(0.05)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderTestConfig {
    pub alpha: f64,
    pub tolerance: Tolerance,
    /// Treat `(x_i, y_i)` as coupled draws (common random numbers) and use
    /// the standard error of the paired differences.
    pub paired: bool,
}

impl Default for OrderTestConfig {
    fn default() -> Self {
        Self { alpha: 0.05, tolerance: Tolerance::default(), paired: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Consistent,
    Violation,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Consistent => "CONSISTENT",
            Verdict::Violation => "VIOLATION",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionResult {
    pub id: usize,
    pub kind: String,
    pub params: String,
    pub mean_x: f64,
    pub mean_y: f64,
    /// `mean_y - mean_x`
    pub diff: f64,
    pub stderr: f64,
    /// One-sided p-value for the alternative `E f(Y) - E f(X) < 0`.
    pub p: f64,
    /// Bonferroni-corrected p-value.
    pub p_corrected: f64,
    /// Simultaneous lower confidence bound on the difference.
    pub lower_bound: f64,
    /// Slack used for this function.
    pub epsilon: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub class: Option<FunctionClass>,
    pub family_size: usize,
    pub alpha: f64,
    pub correction: String,
    pub tolerance: Tolerance,
    pub paired: bool,
    pub n_x: usize,
    pub n_y: usize,
    pub verdict: Verdict,
    /// Index of the function with the smallest p-value.
    pub worst: Option<usize>,
    pub per_function: Vec<FunctionResult>,
}

fn mean_var(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    // Welford's update keeps the variance accurate for large means.
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in values {
        n += 1;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, var, n)
}

/// Tests `E f(X) <= E f(Y)` for every `f` in `family`.
///
/// Per function the difference `mean f(Y) - mean f(X)` gets a normal-theory
/// standard error. The verdict is
/// * `VIOLATION` if some Bonferroni-corrected one-sided p-value for
///   "difference < 0" is below `alpha`;
/// * `CONSISTENT` if every simultaneous lower bound
///   `diff - z_{1 - alpha/m} se` is at least `-epsilon`;
/// * `INCONCLUSIVE` otherwise.
pub fn empirical_order_test(
    x: &SampleMatrix,
    y: &SampleMatrix,
    family: &[TestFunction],
    config: &OrderTestConfig,
) -> Result<OrderingReport> {
    if x.is_empty() || y.is_empty() {
        return invalid("both sample sets must be nonempty");
    }
    if family.is_empty() {
        return invalid("test family must be nonempty");
    }
    if x.dim() != y.dim() {
        return invalid(format!("sample dimensions differ: {} vs {}", x.dim(), y.dim()));
    }
    if let Some(f) = family.iter().find(|f| f.dim() > x.dim()) {
        return invalid(format!("test function reads {} coordinates, samples have {}", f.dim(), x.dim()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {}", config.alpha));
    }
    if config.paired && x.rows() != y.rows() {
        return invalid("paired test needs equal sample sizes");
    }
    // Literally identical inputs are a perfect coupling; pairing them makes
    // every difference exactly zero instead of charging two sampling errors.
    let paired = config.paired || (x.rows() == y.rows() && x.as_slice() == y.as_slice());
    let m = family.len();
    let z = norm_quantile(1.0 - config.alpha / m as f64);
    let per_function: Vec<FunctionResult> = family
        .par_iter()
        .enumerate()
        .map(|(id, f)| {
            let (mx, vx, nx) = mean_var(x.iter_rows().map(|r| f.eval(r)));
            let (my, vy, ny) = mean_var(y.iter_rows().map(|r| f.eval(r)));
            let se = if paired {
                let (_, vd, nd) = mean_var(x.iter_rows().zip(y.iter_rows()).map(|(a, b)| f.eval(b) - f.eval(a)));
                (vd / nd as f64).sqrt()
            } else {
                (vx / nx as f64 + vy / ny as f64).sqrt()
            };
            let diff = my - mx;
            let p = if se > 0.0 {
                norm_cdf(diff / se)
            } else if diff < 0.0 {
                0.0
            } else {
                1.0
            };
            let p_corrected = (p * m as f64).min(1.0);
            let epsilon = match config.tolerance {
                Tolerance::Absolute(e) => e,
                Tolerance::PooledSdFraction(c) => c * (0.5 * (vx + vy)).sqrt(),
            };
            let lower_bound = diff - z * se;
            let verdict = if p_corrected < config.alpha {
                Verdict::Violation
            } else if lower_bound >= -epsilon {
                Verdict::Consistent
            } else {
                Verdict::Inconclusive
            };
            FunctionResult {
                id,
                kind: f.kind().to_string(),
                params: f.params(),
                mean_x: mx,
                mean_y: my,
                diff,
                stderr: se,
                p,
                p_corrected,
                lower_bound,
                epsilon,
                verdict,
            }
        })
        .collect();
    let verdict = if per_function.iter().any(|r| r.verdict == Verdict::Violation) {
        Verdict::Violation
    } else if per_function.iter().all(|r| r.verdict == Verdict::Consistent) {
        Verdict::Consistent
    } else {
        Verdict::Inconclusive
    };
    let worst = per_function
        .iter()
        .min_by(|a, b| a.p.total_cmp(&b.p).then(a.id.cmp(&b.id)))
        .map(|r| r.id);
    Ok(OrderingReport {
        class: None,
        family_size: m,
        alpha: config.alpha,
        correction: "bonferroni".to_string(),
        tolerance: config.tolerance,
        paired,
        n_x: x.rows(),
        n_y: y.rows(),
        verdict,
        worst,
        per_function,
    })
}

impl OrderingReport {
    pub fn with_class(mut self, class: FunctionClass) -> Self {
        self.class = Some(class);
        self
    }

    pub fn worst_function(&self) -> Option<&FunctionResult> {
        self.worst.map(|i| &self.per_function[i])
    }

    /// CSV with columns `id,kind,params,diff,stderr,p,verdict`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,kind,params,diff,stderr,p,verdict")?;
        for r in &self.per_function {
            writeln!(
                w,
                "{},{},{},{:?},{:?},{:?},{}",
                r.id,
                r.kind,
                r.params,
                r.diff,
                r.stderr,
                r.p,
                r.verdict.as_str()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orders::generate_family;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, sd: f64, seed: u64) -> SampleMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        SampleMatrix::from_scalars(
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sd * z
                })
                .collect(),
        )
    }

    fn cx_family() -> Vec<TestFunction> {
        let mut fam = Vec::new();
        for a in [-1.0, 0.0, 1.0] {
            fam.push(TestFunction::Hinge { direction: vec![1.0], anchor: a });
            fam.push(TestFunction::Hinge { direction: vec![-1.0], anchor: -a });
        }
        fam
    }

    #[test]
    fn identical_samples_are_consistent() {
        let x = normals(1000, 1.0, 1);
        let fam = generate_family(FunctionClass::Cx, 1, 3, Some(&x)).unwrap();
        let r = empirical_order_test(&x, &x, &fam, &OrderTestConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert!(r.per_function.iter().all(|f| f.diff == 0.0));
    }

    #[test]
    fn normal_variance_ordering() {
        let sd2 = 2f64.sqrt();
        let x = normals(100_000, 1.0, 2);
        let y = normals(100_000, sd2, 3);
        let cfg = OrderTestConfig::default();
        let r = empirical_order_test(&x, &y, &cx_family(), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent, "{}", r.to_json());
        // stop-loss at a = 0: 0.3989 vs 0.5642
        let at0 = &r.per_function[2];
        assert!((at0.mean_x - 0.398_942).abs() < 0.01);
        assert!((at0.mean_y - 0.564_190).abs() < 0.01);
        let r = empirical_order_test(&y, &x, &cx_family(), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Violation);
    }

    #[test]
    fn degenerate_standard_errors() {
        let x = SampleMatrix::from_scalars(vec![1.0; 10]);
        let y = SampleMatrix::from_scalars(vec![0.0; 10]);
        let fam = vec![TestFunction::Linear { direction: vec![1.0], sign: 1.0 }];
        let r = empirical_order_test(&x, &y, &fam, &OrderTestConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Violation);
        assert_eq!(r.per_function[0].p, 0.0);
        let r = empirical_order_test(&y, &x, &fam, &OrderTestConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
    }

    #[test]
    fn input_validation() {
        let x = normals(10, 1.0, 4);
        let empty = SampleMatrix::from_scalars(vec![]);
        let fam = cx_family();
        let cfg = OrderTestConfig::default();
        assert!(empirical_order_test(&empty, &x, &fam, &cfg).is_err());
        assert!(empirical_order_test(&x, &x, &[], &cfg).is_err());
        let bad = OrderTestConfig { alpha: 1.5, ..cfg };
        assert!(empirical_order_test(&x, &x, &fam, &bad).is_err());
    }

    #[test]
    fn csv_and_json_outputs() {
        let x = normals(200, 1.0, 5);
        let y = normals(200, 1.0, 6);
        let r = empirical_order_test(&x, &y, &cx_family(), &OrderTestConfig::default())
            .unwrap()
            .with_class(FunctionClass::Cx);
        let csv = r.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "id,kind,params,diff,stderr,p,verdict");
        assert_eq!(lines.len(), 7);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
        let back: OrderingReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn paired_mode_uses_difference_variance() {
        let x = normals(5000, 1.0, 7);
        let shifted = SampleMatrix::from_scalars(x.as_slice().iter().map(|v| v + 0.01).collect());
        let fam = vec![TestFunction::Linear { direction: vec![1.0], sign: 1.0 }];
        let paired = OrderTestConfig { paired: true, ..Default::default() };
        let r = empirical_order_test(&x, &shifted, &fam, &paired).unwrap();
        assert!(r.per_function[0].stderr < 1e-12);
        assert_eq!(r.verdict, Verdict::Consistent);
        let r = empirical_order_test(&shifted, &x, &fam, &paired).unwrap();
        assert_eq!(r.verdict, Verdict::Violation);
    }
}
