//! Parameter conditions for increasing convex comparison of generalized
//! hyperbolic laws and NIG processes.

use super::hypothesis::HypothesisReport;
use super::table1::psd_difference_eigenvalues;
use crate::error::{invalid, Error, Result};
use crate::orders::{empirical_order_test, generate_componentwise_family, AnchorSource, FunctionClass, OrderTestConfig, OrderingReport};
use crate::sample::SampleMatrix;
use crate::samplers::{sample_nig_process, GhParams, RngStream};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

const TOL: f64 = 1e-12;

/// Admissible configurations of skewness vectors and dispersion matrices:
/// * `C28`: `0 <= beta1 <= beta2`, both dispersions the identity;
/// * `C29`: `beta1 = beta2 = 0`, `Delta1 <=psd Delta2`;
/// * `C30`: `0 <= beta1 <= beta2`, `Delta1 <=psd Delta2` and
///   `0 <= Delta1_ij <= Delta2_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GhCase {
    C28,
    C29,
    C30,
}

impl FromStr for GhCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C28" => Ok(GhCase::C28),
            "C29" => Ok(GhCase::C29),
            "C30" => Ok(GhCase::C30),
            _ => invalid(format!("unknown GH case `{s}` (expected C28, C29 or C30)")),
        }
    }
}

fn vec_le(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= y + TOL * (1.0 + y.abs()))
}

fn fmt_vec(v: &[f64]) -> String {
    format!("{v:?}")
}

/// Checks `lambda1 <= lambda2`, `delta1 <= delta2`, `alpha1 >= alpha2`,
/// `mu1 <= mu2` and the skewness/dispersion conditions of `case`; also
/// reports the derived condition `gamma1 >= gamma2`.
pub fn check_gh_hypotheses(p1: &GhParams, p2: &GhParams, case: GhCase) -> Result<HypothesisReport> {
    p1.validate()?;
    p2.validate()?;
    if p1.dim() != p2.dim() {
        return invalid(format!("GH laws have different dimensions ({} vs {})", p1.dim(), p2.dim()));
    }
    let d = p1.dim();
    let mut r = HypothesisReport::new();
    r.check("lambda", p1.lambda <= p2.lambda + TOL, format!("{} <= {}", p1.lambda, p2.lambda));
    r.check("delta", p1.delta <= p2.delta + TOL, format!("{} <= {}", p1.delta, p2.delta));
    r.check("alpha", p1.alpha + TOL >= p2.alpha, format!("{} >= {}", p1.alpha, p2.alpha));
    r.check("mu", vec_le(&p1.mu, &p2.mu), format!("{} <= {}", fmt_vec(&p1.mu), fmt_vec(&p2.mu)));
    let (d1, d2) = (p1.dispersion_matrix(), p2.dispersion_matrix());
    let identity = |m: &nalgebra::DMatrix<f64>| (m - nalgebra::DMatrix::identity(d, d)).amax() <= TOL;
    let zero = vec![0.0; d];
    let psd = || psd_difference_eigenvalues(&d1, &d2)[0] >= -TOL * (1.0 + d2.amax());
    let beta_ordered = vec_le(&zero, &p1.beta) && vec_le(&p1.beta, &p2.beta);
    let beta_detail = format!("0 <= {} <= {}", fmt_vec(&p1.beta), fmt_vec(&p2.beta));
    match case {
        GhCase::C28 => {
            r.check("beta", beta_ordered, beta_detail);
            r.check("dispersion", identity(&d1) && identity(&d2), "Delta1 = Delta2 = I");
        }
        GhCase::C29 => {
            let zero_beta = p1.beta.iter().chain(&p2.beta).all(|b| b.abs() <= TOL);
            r.check(
                "beta",
                zero_beta,
                format!("beta1 = beta2 = 0 (got {} and {})", fmt_vec(&p1.beta), fmt_vec(&p2.beta)),
            );
            r.check("dispersion", psd(), "Delta1 <=psd Delta2");
        }
        GhCase::C30 => {
            r.check("beta", beta_ordered, beta_detail);
            let entrywise = (0..d).all(|i| (0..d).all(|j| d1[(i, j)] >= -TOL && d1[(i, j)] <= d2[(i, j)] + TOL));
            r.check("dispersion", psd() && entrywise, "Delta1 <=psd Delta2 and 0 <= Delta1_ij <= Delta2_ij");
        }
    }
    let (g1, g2) = (p1.gamma(), p2.gamma());
    r.check("gamma (derived)", g1 + TOL >= g2, format!("{g1} >= {g2}"));
    Ok(r)
}

/// Two-time comparison of NIG processes at `(T/2, T)` with a componentwise
/// increasing convex family on the stacked values.
pub fn nig_two_time_test(
    p1: &GhParams,
    p2: &GhParams,
    horizon: f64,
    n: usize,
    anchors: usize,
    config: &OrderTestConfig,
    stream: &RngStream,
) -> Result<(OrderingReport, SampleMatrix, SampleMatrix)> {
    if !(horizon > 0.0) {
        return invalid(format!("horizon must be positive, got {horizon}"));
    }
    let grid = [0.5 * horizon, horizon];
    let x = sample_nig_process(p1, &grid, n, &stream.substream(1))?;
    let y = sample_nig_process(p2, &grid, n, &stream.substream(2))?;
    let pooled = SampleMatrix::new(x.dim(), x.as_slice().iter().chain(y.as_slice()).copied().collect())?;
    let family = generate_componentwise_family(FunctionClass::Icx, p1.dim(), 2, anchors, AnchorSource::Sample(pooled))?;
    let rep = empirical_order_test(&x, &y, &family, config)?.with_class(FunctionClass::Icx);
    Ok((rep, x, y))
}
