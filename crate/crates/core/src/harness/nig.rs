//! Convex ordering of one-dimensional NIG processes in the shape parameter
//! `alpha` and the scale parameter `delta`, with the location chosen so
//! that both processes have the same mean.

use super::hypothesis::HypothesisReport;
use crate::error::{invalid, Result};
use crate::levy::{density_domination, nig_levy_density, DominationMode};
use crate::orders::{empirical_order_test, generate_family, FunctionClass, OrderTestConfig, OrderingReport};
use crate::sample::SampleMatrix;
use crate::samplers::{sample_gh, GhParams, RngStream};
use crate::stats;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NigExample {
    /// `alpha1 <= alpha2`: densities satisfy `f1 >= f2`, so `S2 <=cx S1`.
    Alpha,
    /// `delta1 <= delta2`: densities satisfy `f1 <= f2`, so `S1 <=cx S2`.
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NigExampleParams {
    /// The varied parameter (alpha or delta) of the first process.
    pub first: f64,
    /// The varied parameter of the second process.
    pub second: f64,
    /// The shared other parameter (delta for ALPHA, alpha for DELTA).
    pub shared: f64,
    #[serde(default)]
    pub beta: f64,
    /// Common mean `E S_1`.
    #[serde(default)]
    pub mean: f64,
    #[serde(default = "one")]
    pub horizon: f64,
}

fn one() -> f64 {
    1.0
}

impl NigExampleParams {
    pub fn new(first: f64, second: f64, shared: f64) -> Self {
        Self { first, second, shared, beta: 0.0, mean: 0.0, horizon: 1.0 }
    }

    /// `(alpha, delta)` of both processes.
    pub fn alpha_delta(&self, ex: NigExample) -> [(f64, f64); 2] {
        match ex {
            NigExample::Alpha => [(self.first, self.shared), (self.second, self.shared)],
            NigExample::Delta => [(self.shared, self.first), (self.shared, self.second)],
        }
    }

    /// Unit-time NIG laws with `mu = mean - delta beta / sqrt(alpha^2 - beta^2)`.
    pub fn laws(&self, ex: NigExample) -> Result<[GhParams; 2]> {
        let [(a1, d1), (a2, d2)] = self.alpha_delta(ex);
        let mk = |a: f64, d: f64| -> Result<GhParams> {
            if !(self.beta.abs() < a) {
                return invalid(format!("mean matching needs |beta| < alpha (beta = {}, alpha = {a})", self.beta));
            }
            let mu = self.mean - d * self.beta / (a * a - self.beta * self.beta).sqrt();
            GhParams::nig_1d(a, self.beta, d, mu)
        };
        Ok([mk(a1, d1)?, mk(a2, d2)?])
    }
}

/// Outcome of an NIG example run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NigExampleOutcome {
    pub example: NigExample,
    pub hypothesis: HypothesisReport,
    /// Convex-order test with `x` the process concluded to be smaller.
    pub ordering: OrderingReport,
    /// Index (1 or 2) of the process concluded to be smaller.
    pub smaller: usize,
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub variance_stderrs: [f64; 2],
    /// `delta T / gamma * alpha^2 / gamma^2`: the exact terminal variances.
    pub exact_variances: [f64; 2],
}

/// Grid for the density comparison: `points / 2` log-spaced magnitudes in
/// `[1e-3, 1e2]` on each side of the origin.
pub fn symmetric_log_grid(points: usize) -> Vec<f64> {
    let half = (points / 2).max(2);
    let pos: Vec<f64> = (0..half).map(|i| 10f64.powf(-3.0 + 5.0 * i as f64 / (half - 1) as f64)).collect();
    let mut g: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
    g.extend(pos);
    g
}

/// Checks the density ordering in the direction the example dictates, then
/// samples both terminal values and tests the concluded convex order.
pub fn run_nig_example(
    example: NigExample,
    params: &NigExampleParams,
    n: usize,
    config: &OrderTestConfig,
    stream: &RngStream,
) -> Result<NigExampleOutcome> {
    if !(params.first <= params.second) {
        return invalid(format!("the first parameter must not exceed the second ({} > {})", params.first, params.second));
    }
    if !(params.horizon > 0.0) {
        return invalid(format!("horizon must be positive, got {}", params.horizon));
    }
    let laws = params.laws(example)?;
    let [(a1, d1), (a2, d2)] = params.alpha_delta(example);
    let beta = params.beta;
    let f1 = move |x: f64| nig_levy_density(x, a1, beta, d1).unwrap_or(0.0);
    let f2 = move |x: f64| nig_levy_density(x, a2, beta, d2).unwrap_or(0.0);
    let grid = symmetric_log_grid(1000);
    let mut hyp = HypothesisReport::new();
    let (dominated, smaller) = match example {
        NigExample::Alpha => (density_domination(f2, f1, DominationMode::Global, &grid)?, 2),
        NigExample::Delta => (density_domination(f1, f2, DominationMode::Global, &grid)?, 1),
    };
    let rule = match example {
        NigExample::Alpha => "f1 >= f2 pointwise",
        NigExample::Delta => "f1 <= f2 pointwise",
    };
    hyp.check("density domination", dominated, format!("{rule} on {} grid points", grid.len()));
    let means: Vec<f64> = laws.iter().map(|p| p.mean()[0]).collect();
    hyp.check(
        "equal means",
        (means[0] - means[1]).abs() <= 1e-12 * (1.0 + means[0].abs()),
        format!("E S1 = {} and {}", means[0], means[1]),
    );
    hyp.check("integrability", true, "NIG laws have moments of every order");
    hyp.check(
        "infinite variation near zero",
        true,
        "the NIG density behaves like delta / (pi x^2) at the origin",
    );

    let t = params.horizon;
    let at_t = |p: &GhParams| GhParams::nig_1d(p.alpha, p.beta[0], p.delta * t, p.mu[0] * t);
    let s1 = sample_gh(&at_t(&laws[0])?, n, &stream.substream(1))?;
    let s2 = sample_gh(&at_t(&laws[1])?, n, &stream.substream(2))?;
    let (x, y) = if smaller == 1 { (&s1, &s2) } else { (&s2, &s1) };
    let pooled = SampleMatrix::from_scalars(x.as_slice().iter().chain(y.as_slice()).copied().collect());
    let family = generate_family(FunctionClass::Cx, 1, 9, Some(&pooled))?;
    let ordering = empirical_order_test(x, y, &family, config)?.with_class(FunctionClass::Cx);
    let var = |s: &SampleMatrix| (stats::variance(s.as_slice()), stats::variance_stderr(s.as_slice()));
    let (v1, e1) = var(&s1);
    let (v2, e2) = var(&s2);
    let exact = |p: &GhParams| {
        let g = p.gamma();
        p.delta * t * p.alpha * p.alpha / (g * g * g)
    };
    Ok(NigExampleOutcome {
        example,
        hypothesis: hyp,
        ordering,
        smaller,
        means: [stats::mean(s1.as_slice()), stats::mean(s2.as_slice())],
        variances: [v1, v2],
        variance_stderrs: [e1, e2],
        exact_variances: [exact(&laws[0]), exact(&laws[1])],
    })
}
