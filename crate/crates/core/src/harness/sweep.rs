//! Truncation sweeps: infinite-activity Lévy measures are cut to
//! `(-eps_n, eps_n)^c`, the lighter measure receives an atom at zero so
//! both have the same mass, and the induced compound Poisson pair is compared
//! at each level `eps_n = 2^-n`.

use super::measures::{compare_truncated_1d, comparison_grid};
use crate::error::{invalid, Result};
use crate::levy::{first_moment, modify_pair, solve_truncation_levels, truncate, LevyDistributionFunction, LevyMeasure, TruncatedLevyMeasure};
use crate::orders::{cut_criterion_1d, empirical_order_test, generate_family, FunctionClass, OrderTestConfig, OrderingReport, Verdict};
use crate::sample::SampleMatrix;
use crate::samplers::{sample_compound_poisson_coupled, CompoundPoissonSpec, Coupling, RngStream};
use serde::{Deserialize, Serialize};

/// Mean or drift data selecting the comparison route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftData {
    /// Convex-type classes with `E S1 = E S2 = mean`; both truncated
    /// measures are given zero first moment by moving the upper level.
    EqualMeans { mean: f64 },
    /// Increasing classes with `mean1 <= mean2`; the truncated first moments
    /// must satisfy `0 <= m2 - m1 <= mean2 - mean1`.
    OrderedMeans { mean1: f64, mean2: f64 },
    /// Finite-variation processes with drifts `b1 <= b2` in the
    /// zero-truncation convention; needs `m1 <= m2`.
    FiniteVariation { drift1: f64, drift2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSampling {
    pub n: usize,
    pub horizon: f64,
    pub anchors: usize,
}

impl Default for SweepSampling {
    fn default() -> Self {
        Self { n: 100_000, horizon: 1.0, anchors: 9 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepLevel {
    pub level: u32,
    pub eps: f64,
    pub eps_low: [f64; 2],
    pub eps_up: [f64; 2],
    /// Total masses after the zero-atom modification (equal).
    pub mass: f64,
    pub zero_atoms: [f64; 2],
    /// Truncated first moments `int x Fn(dx)`.
    pub first_moments: [f64; 2],
    pub moment_condition: bool,
    pub measure_order: bool,
    pub measure_detail: String,
    /// Single crossing of the modified Lévy distribution functions (CX).
    pub cut_criterion: Option<bool>,
    pub ordering: Option<OrderingReport>,
    pub verdict: Option<Verdict>,
    /// Set when the level could not be built; the sweep continues.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub class: FunctionClass,
    pub route: DriftData,
    pub levels: Vec<SweepLevel>,
    /// Measure-level ordering held at every level that could be built.
    pub measure_order_all: bool,
    /// Monte-Carlo verdicts agree over the three finest levels.
    pub stable_tail: bool,
}

fn route_allows(route: &DriftData, class: FunctionClass) -> bool {
    match route {
        DriftData::EqualMeans { .. } => true,
        _ => class.is_increasing(),
    }
}

struct Built {
    t1: TruncatedLevyMeasure,
    t2: TruncatedLevyMeasure,
    drift0: [f64; 2],
    moments: [f64; 2],
    moment_ok: bool,
}

fn build_level(f1: &LevyMeasure, f2: &LevyMeasure, route: &DriftData, eps: f64) -> Result<Built> {
    let m = |t: &TruncatedLevyMeasure| -> Result<f64> { Ok(first_moment(t)?[0]) };
    match *route {
        DriftData::EqualMeans { mean } => {
            let u1 = solve_truncation_levels(f1, -eps, 0.0)?;
            let u2 = solve_truncation_levels(f2, -eps, 0.0)?;
            let (t1, t2) = (truncate(f1, -eps, u1)?, truncate(f2, -eps, u2)?);
            let moments = [m(&t1)?, m(&t2)?];
            let scale = t1.abs_moment(1)?.max(t2.abs_moment(1)?).max(1.0);
            let moment_ok = (moments[0] - moments[1]).abs() <= 1e-8 * scale;
            Ok(Built { t1, t2, drift0: [mean - moments[0], mean - moments[1]], moments, moment_ok })
        }
        DriftData::OrderedMeans { mean1, mean2 } => {
            let t1 = truncate(f1, -eps, eps)?;
            let mut t2 = truncate(f2, -eps, eps)?;
            let m1 = m(&t1)?;
            let gap = mean2 - mean1;
            let ok = |m2: f64| m2 - m1 >= -1e-12 && m2 - m1 <= gap + 1e-12;
            if !ok(m(&t2)?) {
                // move the upper level of the second measure to hit the
                // middle of the admissible window
                let u2 = solve_truncation_levels(f2, -eps, m1 + 0.5 * gap)?;
                t2 = truncate(f2, -eps, u2)?;
            }
            let moments = [m1, m(&t2)?];
            Ok(Built {
                drift0: [mean1 - moments[0], mean2 - moments[1]],
                moment_ok: ok(moments[1]) && gap >= 0.0,
                t1,
                t2,
                moments,
            })
        }
        DriftData::FiniteVariation { drift1, drift2 } => {
            let (t1, t2) = (truncate(f1, -eps, eps)?, truncate(f2, -eps, eps)?);
            let moments = [m(&t1)?, m(&t2)?];
            Ok(Built {
                t1,
                t2,
                drift0: [drift1, drift2],
                moment_ok: moments[0] <= moments[1] + 1e-12 && drift1 <= drift2,
                moments,
            })
        }
    }
}

/// Runs the sweep over `eps_n = 2^-n` for `n` in `levels`.
pub fn run_truncation_sweep(
    f1: &LevyMeasure,
    f2: &LevyMeasure,
    route: DriftData,
    class: FunctionClass,
    levels: &[u32],
    sampling: &SweepSampling,
    config: &OrderTestConfig,
    stream: &RngStream,
) -> Result<SweepReport> {
    if f1.dim() != 1 || f2.dim() != 1 {
        return invalid("truncation sweeps need one-dimensional Lévy measures");
    }
    if levels.is_empty() || levels.iter().any(|&n| n == 0 || n > 30) {
        return invalid("levels must be nonempty and lie in 1..=30");
    }
    if !route_allows(&route, class) {
        return invalid(format!("the {class} class needs the equal-means route"));
    }
    if class == FunctionClass::Sm {
        return invalid("on the line the supermodular order is equality; use ST in both directions");
    }
    let mut out = Vec::with_capacity(levels.len());
    for &n in levels {
        let eps = 0.5f64.powi(n as i32);
        let mut lvl = SweepLevel {
            level: n,
            eps,
            eps_low: [-eps; 2],
            eps_up: [f64::NAN; 2],
            mass: f64::NAN,
            zero_atoms: [0.0; 2],
            first_moments: [f64::NAN; 2],
            moment_condition: false,
            measure_order: false,
            measure_detail: String::new(),
            cut_criterion: None,
            ordering: None,
            verdict: None,
            error: None,
        };
        let built = match build_level(f1, f2, &route, eps) {
            Ok(b) => b,
            Err(e) => {
                lvl.error = Some(e.to_string());
                out.push(lvl);
                continue;
            }
        };
        let (t1, t2) = modify_pair(&built.t1, &built.t2);
        lvl.eps_up = [t1.eps_up, t2.eps_up];
        lvl.mass = t1.mass();
        lvl.zero_atoms = [t1.zero_atom_weight, t2.zero_atom_weight];
        lvl.first_moments = built.moments;
        lvl.moment_condition = built.moment_ok;
        let result = (|| -> Result<()> {
            if matches!(class, FunctionClass::Cx | FunctionClass::Dcx) && (t1.to_discrete().is_none() || t2.to_discrete().is_none()) {
                let grid = comparison_grid(&t1, &t2, 400)?;
                let cut = cut_criterion_1d(
                    &LevyDistributionFunction::new(t1.clone())?,
                    &LevyDistributionFunction::new(t2.clone())?,
                    &grid,
                )?;
                lvl.cut_criterion = Some(cut.single_crossing);
                lvl.measure_order = cut.single_crossing && built.moment_ok;
                lvl.measure_detail = match cut.crossing {
                    Some(x) => format!("single crossing at {x:e} on {} grid points, equal first moments", grid.len()),
                    None => format!("no single crossing on {} grid points", grid.len()),
                };
            } else {
                let r = compare_truncated_1d(&t1, &t2, class)?;
                lvl.measure_order = r.holds;
                lvl.measure_detail = r.detail;
            }
            let s1 = CompoundPoissonSpec::from_truncated(vec![built.drift0[0]], &t1)?;
            let s2 = CompoundPoissonSpec::from_truncated(vec![built.drift0[1]], &t2)?;
            let paths = sample_compound_poisson_coupled(
                &s1,
                &s2,
                &[sampling.horizon],
                sampling.n,
                Coupling::SharedClockComonotone,
                &stream.substream(n as u64),
            )?;
            let (x, y) = (paths.terminal1(), paths.terminal2());
            let pooled = SampleMatrix::from_scalars(x.as_slice().iter().chain(y.as_slice()).copied().collect());
            let family = generate_family(class, 1, sampling.anchors, Some(&pooled))?;
            let cfg = OrderTestConfig { paired: true, ..*config };
            let rep = empirical_order_test(&x, &y, &family, &cfg)?.with_class(class);
            lvl.verdict = Some(rep.verdict);
            lvl.ordering = Some(rep);
            Ok(())
        })();
        if let Err(e) = result {
            lvl.error = Some(e.to_string());
        }
        out.push(lvl);
    }
    let built: Vec<&SweepLevel> = out.iter().filter(|l| l.error.is_none()).collect();
    let measure_order_all = !built.is_empty() && built.iter().all(|l| l.measure_order);
    let tail: Vec<Option<Verdict>> = out.iter().rev().take(3).map(|l| l.verdict).collect();
    let stable_tail = tail.len() == 3.min(out.len()) && tail.iter().all(|v| v.is_some() && *v == tail[0]);
    Ok(SweepReport { class, route, levels: out, measure_order_all, stable_tail })
}
