//! The process types an experiment can compare, their differential
//! characteristics and terminal-value sampling.

use crate::error::{invalid, Result};
use crate::jumpdiff::{euler_path, EulerConfig, IntensityMeasure, JumpDiffusionSpec};
use crate::levy::{first_moment, truncate, JumpTable, LevyDensity, LevyMeasure, LevyTriplet, MeasureForm};
use crate::orders::DiscreteMeasure;
use crate::quadrature::integrate;
use crate::sample::SampleMatrix;
use crate::samplers::{
    sample_compound_poisson_coupled, sample_gh, sample_levy_truncated, CompoundPoissonSpec, Coupling, GhParams,
    LevyPathOptions, RngStream,
};
use nalgebra::DMatrix;

/// Atoms used when an absolutely continuous intensity measure is replaced by
/// its quantile discretization.
pub const INTENSITY_ATOMS: usize = 1024;

/// A compound Poisson process together with its jump law, kept so that the
/// characteristics can be compared.
#[derive(Debug, Clone)]
pub struct CompoundPoissonProcess {
    pub spec: CompoundPoissonSpec,
    /// Probability law of the jumps.
    pub law: MeasureForm,
}

impl CompoundPoissonProcess {
    pub fn new(drift: Vec<f64>, intensity: f64, law: MeasureForm) -> Result<Self> {
        let spec = match &law {
            MeasureForm::Atomic(m) => CompoundPoissonSpec::new(drift, intensity, m)?,
            MeasureForm::Density(d) => CompoundPoissonSpec::with_density(drift, intensity, d)?,
        };
        Ok(Self { spec, law })
    }

    /// The Lévy measure `lambda R`.
    pub fn levy_measure(&self) -> Result<LevyMeasure> {
        let lambda = self.spec.intensity;
        match &self.law {
            MeasureForm::Atomic(m) => {
                let atoms: Vec<(Vec<f64>, f64)> = m
                    .atoms()
                    .iter()
                    .filter(|a| a.point.iter().any(|x| *x != 0.0))
                    .map(|a| (a.point.clone(), a.weight * lambda))
                    .collect();
                LevyMeasure::atomic(DiscreteMeasure::new(m.dim(), atoms_from(&atoms))?)
            }
            MeasureForm::Density(d) => {
                let inner = d.clone();
                let scaled = LevyDensity::new(format!("{lambda} x {}", d.label), d.lower, d.upper, move |x| {
                    lambda * inner.eval(x)
                })?;
                Ok(LevyMeasure::from_density(scaled, false))
            }
        }
    }
}

fn atoms_from(pairs: &[(Vec<f64>, f64)]) -> Vec<crate::orders::Atom> {
    pairs.iter().map(|(p, w)| crate::orders::Atom { point: p.clone(), weight: *w }).collect()
}

/// One side of a comparison.
#[derive(Clone)]
pub enum Process {
    Levy(LevyTriplet),
    CompoundPoisson(CompoundPoissonProcess),
    JumpDiffusion(JumpDiffusionSpec),
    Gh(GhParams),
}

impl std::fmt::Debug for Process {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Process::Levy(t) => f.debug_tuple("Levy").field(t).finish(),
            Process::CompoundPoisson(c) => f.debug_tuple("CompoundPoisson").field(c).finish(),
            Process::JumpDiffusion(j) => f.debug_tuple("JumpDiffusion").field(&j.label).finish(),
            Process::Gh(p) => f.debug_tuple("Gh").field(p).finish(),
        }
    }
}

/// Differential characteristics `(b, c, K)` at one point, with the drift in
/// the identity-truncation convention and `K` the jump measure.
#[derive(Debug, Clone)]
pub struct Characteristics {
    pub drift: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub jumps: LevyMeasure,
}

impl Process {
    pub fn dim(&self) -> usize {
        match self {
            Process::Levy(t) => t.dim(),
            Process::CompoundPoisson(c) => c.spec.dim(),
            Process::JumpDiffusion(j) => j.dim(),
            Process::Gh(p) => p.dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Process::Levy(_) => "levy",
            Process::CompoundPoisson(_) => "compound_poisson",
            Process::JumpDiffusion(_) => "jump_diffusion",
            Process::Gh(_) => "gh",
        }
    }

    /// Whether the transition function is spatially homogeneous (so the
    /// process propagates every ordering class).
    pub fn is_spatially_homogeneous(&self) -> bool {
        match self {
            Process::Levy(_) | Process::CompoundPoisson(_) => true,
            Process::JumpDiffusion(j) => j.is_spatially_homogeneous(),
            Process::Gh(_) => false,
        }
    }

    /// Whether the characteristics depend on time or state.
    pub fn is_state_dependent(&self) -> bool {
        matches!(self, Process::JumpDiffusion(j) if !j.is_spatially_homogeneous())
    }

    /// Initial value.
    pub fn start(&self) -> Vec<f64> {
        match self {
            Process::JumpDiffusion(j) => j.s0.clone(),
            _ => vec![0.0; self.dim()],
        }
    }

    /// Characteristics at time `t` and state `s`.
    pub fn characteristics(&self, t: f64, s: &[f64]) -> Result<Characteristics> {
        match self {
            Process::Levy(tr) => Ok(Characteristics {
                drift: tr.drift.clone(),
                covariance: tr.sigma.clone(),
                jumps: tr.measure.clone(),
            }),
            Process::CompoundPoisson(c) => {
                let jumps = c.levy_measure()?;
                let mean = finite_first_moment(&jumps)?;
                Ok(Characteristics {
                    drift: c.spec.drift.iter().zip(&mean).map(|(b, m)| b + m).collect(),
                    covariance: DMatrix::zeros(c.spec.dim(), c.spec.dim()),
                    jumps,
                })
            }
            Process::JumpDiffusion(j) => Ok(Characteristics {
                drift: j.drift_at(t, s),
                covariance: j.covariance_at(t, s),
                jumps: jump_kernel(j, t, s)?,
            }),
            Process::Gh(_) => invalid(
                "a GH law is not given by differential characteristics; compare GH parameters with check_gh_hypotheses",
            ),
        }
    }

    /// `n` draws of the value at time `horizon` (GH laws ignore the horizon).
    pub fn sample_terminal(&self, horizon: f64, n: usize, plan: &TerminalSampling, stream: &RngStream) -> Result<SampleMatrix> {
        match self {
            Process::Levy(tr) => {
                let (tr, trunc) = levy_with_small_jumps(tr, plan.truncation)?;
                sample_levy_truncated(&tr, &trunc, &[horizon], n, stream, LevyPathOptions::default())
            }
            Process::CompoundPoisson(c) => {
                let paths = sample_compound_poisson_coupled(&c.spec, &c.spec, &[horizon], n, Coupling::SharedClock, stream)?;
                Ok(paths.terminal1())
            }
            Process::JumpDiffusion(j) => {
                let cfg = EulerConfig::new(0.0, horizon, plan.euler_steps, n, stream.clone());
                euler_path(j, &cfg)
            }
            Process::Gh(p) => sample_gh(p, n, stream),
        }
    }
}

/// Sampling knobs shared by terminal-value samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalSampling {
    /// Jumps smaller than this are replaced by their Gaussian approximation
    /// for infinite-activity Lévy measures.
    pub truncation: f64,
    /// Euler steps for jump diffusions.
    pub euler_steps: usize,
}

impl Default for TerminalSampling {
    fn default() -> Self {
        Self { truncation: 1e-3, euler_steps: 64 }
    }
}

/// `int x K(dx)` for a finite Lévy measure.
pub fn finite_first_moment(m: &LevyMeasure) -> Result<Vec<f64>> {
    match &m.form {
        MeasureForm::Atomic(d) => Ok(d.first_moment()),
        MeasureForm::Density(_) => first_moment(&truncate(m, -1e-12, 1e-12)?),
    }
}

/// Truncates the Lévy measure at `eps` (or keeps it whole if finite) and
/// moves the variance of the removed small jumps into the Gaussian part.
fn levy_with_small_jumps(
    tr: &LevyTriplet,
    eps: f64,
) -> Result<(LevyTriplet, crate::levy::TruncatedLevyMeasure)> {
    match &tr.measure.form {
        MeasureForm::Atomic(m) => {
            let w = m.atoms().iter().flat_map(|a| a.point.iter()).map(|x| x.abs()).filter(|x| *x > 0.0).fold(1.0, f64::min);
            Ok((tr.clone(), truncate(&tr.measure, -0.5 * w, 0.5 * w)?))
        }
        MeasureForm::Density(d) => {
            if !tr.measure.declared_infinite_mass {
                return Ok((tr.clone(), truncate(&tr.measure, -1e-12, 1e-12)?));
            }
            if !(eps > 0.0) {
                return invalid(format!("truncation level must be positive, got {eps}"));
            }
            let g = |x: f64| x * x * d.eval(x);
            let small = integrate(g, -eps, 0.0, 1e-10)?.value + integrate(g, 0.0, eps, 1e-10)?.value;
            let mut sigma = tr.sigma.clone();
            sigma[(0, 0)] += small;
            let adjusted = LevyTriplet::new(tr.drift.clone(), sigma, tr.measure.clone())?;
            Ok((adjusted, truncate(&tr.measure, -eps, eps)?))
        }
    }
}

/// The jump measure `K(t, s, .)`: image of the intensity measure under
/// `y -> phi(t, s, y)`, without zero jumps. Density intensities are replaced
/// by [`INTENSITY_ATOMS`] equal-weight quantile atoms.
fn jump_kernel(j: &JumpDiffusionSpec, t: f64, s: &[f64]) -> Result<LevyMeasure> {
    let d = j.dim();
    let Some(intensity) = j.intensity_measure() else {
        return LevyMeasure::zero(d);
    };
    let marks: Vec<(f64, f64)> = match intensity {
        IntensityMeasure::Atomic(m) => m.atoms().iter().map(|a| (a.point[0], a.weight)).collect(),
        IntensityMeasure::Density(dens) => {
            let table = JumpTable::from_density(dens)?;
            let w = table.mass() / INTENSITY_ATOMS as f64;
            (0..INTENSITY_ATOMS).map(|i| (table.quantile((i as f64 + 0.5) / INTENSITY_ATOMS as f64), w)).collect()
        }
    };
    let mut buf = vec![0.0; d];
    let mut atoms = Vec::with_capacity(marks.len());
    for (y, w) in marks {
        j.jump_at(t, s, y, &mut buf);
        if buf.iter().any(|x| *x != 0.0) {
            atoms.push(crate::orders::Atom { point: buf.clone(), weight: w });
        }
    }
    LevyMeasure::atomic(DiscreteMeasure::new(d, atoms)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn compound_poisson_characteristics() {
        let law = MeasureForm::Atomic(DiscreteMeasure::from_1d(&[(0.5, 1.0)]).unwrap());
        let p = Process::CompoundPoisson(CompoundPoissonProcess::new(vec![0.1], 2.0, law).unwrap());
        let c = p.characteristics(0.0, &[0.0]).unwrap();
        // identity-truncation drift: b0 + lambda E X
        assert!((c.drift[0] - 1.1).abs() < 1e-15);
        let unif = MeasureForm::Density(
            crate::levy::LevyDensity::new("u", 0.0, 1.0, |_| 1.0).unwrap(),
        );
        let q = Process::CompoundPoisson(CompoundPoissonProcess::new(vec![0.0], 2.0, unif).unwrap());
        let c = q.characteristics(0.0, &[0.0]).unwrap();
        assert!((c.drift[0] - 1.0).abs() < 1e-9, "{}", c.drift[0]);
        assert!(matches!(Process::Gh(GhParams::nig_1d(1.0, 0.0, 1.0, 0.0).unwrap()).characteristics(0.0, &[0.0]), Err(_)));
    }

    #[test]
    fn infinite_activity_terminal_moments() {
        // NIG(alpha = 1, beta = 0, delta = 1): mean 0, variance delta / alpha = 1.
        let tr = LevyTriplet::new(vec![0.0], DMatrix::zeros(1, 1), LevyMeasure::nig(1.0, 0.0, 1.0).unwrap()).unwrap();
        let x = Process::Levy(tr)
            .sample_terminal(1.0, 200_000, &TerminalSampling::default(), &RngStream::new(3, 0))
            .unwrap();
        let v = x.as_slice();
        assert!(stats::mean(v).abs() < 4.0 * stats::stderr(v));
        assert!((stats::variance(v) - 1.0).abs() < 4.0 * stats::variance_stderr(v), "{}", stats::variance(v));
    }

    #[test]
    fn jump_kernel_drops_zero_jumps() {
        use std::sync::Arc;
        let spec = JumpDiffusionSpec::scalar(0.0, |_, _| 0.0, |_, _| 0.1)
            .with_jumps(
                crate::jumpdiff::JumpLink::Factored {
                    phi: Arc::new(|_, s: &[f64]| s[0].max(0.0)),
                    psi: Arc::new(|_, y, out: &mut [f64]| out[0] = y),
                },
                IntensityMeasure::Atomic(DiscreteMeasure::from_1d(&[(1.0, 0.5), (-1.0, 0.5)]).unwrap()),
            )
            .unwrap();
        let p = Process::JumpDiffusion(spec);
        let at_neg = p.characteristics(0.0, &[-1.0]).unwrap();
        let MeasureForm::Atomic(m) = &at_neg.jumps.form else { panic!() };
        assert!(m.is_empty());
        let at_pos = p.characteristics(0.0, &[2.0]).unwrap();
        let MeasureForm::Atomic(m) = &at_pos.jumps.form else { panic!() };
        assert_eq!(m.len(), 2);
        assert!(p.is_state_dependent());
    }
}
