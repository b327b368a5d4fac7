//! Experiments comparing two processes: the hypotheses are checked on the
//! characteristics, both terminal laws are sampled (coupled where the pair
//! admits it) and the conclusion is tested empirically.

use super::gh::{check_gh_hypotheses, GhCase};
use super::hypothesis::{CombinedVerdict, HypothesisReport};
use super::measures::measures_identical;
use super::process::{Process, TerminalSampling};
use super::table1::{check_table1_on, default_state_points, StatePoints};
use crate::error::{invalid, Result};
use crate::levy::{LevyMeasure, LevyTriplet};
use crate::orders::{empirical_order_test, generate_family, DiscreteMeasure, FunctionClass, OrderTestConfig, OrderingReport};
use crate::sample::SampleMatrix;
use crate::samplers::{sample_compound_poisson_coupled, Coupling, RngStream};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Sample size, horizon and family resolution of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub n: usize,
    pub horizon: f64,
    /// Anchors per axis for the generated test-function family.
    pub anchors: usize,
    pub terminal: TerminalSampling,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self { n: 100_000, horizon: 1.0, anchors: 7, terminal: TerminalSampling::default() }
    }
}

/// A named comparison of two processes under one ordering class.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub process1: Process,
    pub process2: Process,
    pub class: FunctionClass,
    pub plan: SamplingPlan,
    /// Significance level of the empirical test.
    pub alpha: f64,
    /// Hypotheses the author asserts without machine verification.
    pub assumed_flags: Vec<String>,
    /// Parameter configuration for GH pairs.
    pub gh_case: Option<GhCase>,
    /// Points at which state-dependent characteristics are compared; a
    /// pilot-run grid is used when absent.
    pub state_points: Option<StatePoints>,
}

impl Experiment {
    pub fn new(name: impl Into<String>, process1: Process, process2: Process, class: FunctionClass) -> Self {
        Self {
            name: name.into(),
            process1,
            process2,
            class,
            plan: SamplingPlan::default(),
            alpha: 0.01,
            assumed_flags: Vec::new(),
            gh_case: None,
            state_points: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return invalid("experiment name must be nonempty");
        }
        if self.process1.dim() != self.process2.dim() {
            return invalid(format!(
                "processes have different dimensions ({} vs {})",
                self.process1.dim(),
                self.process2.dim()
            ));
        }
        if self.plan.n < 2 {
            return invalid(format!("need at least two draws per process, got {}", self.plan.n));
        }
        if !(self.plan.horizon > 0.0 && self.plan.horizon.is_finite()) {
            return invalid(format!("horizon must be positive and finite, got {}", self.plan.horizon));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        let gh = |p: &Process| matches!(p, Process::Gh(_));
        match (gh(&self.process1), gh(&self.process2)) {
            (true, true) if self.gh_case.is_none() => invalid("GH pairs need a parameter case (C28, C29 or C30)"),
            (true, false) | (false, true) => invalid("a GH law can only be compared with another GH law"),
            _ => Ok(()),
        }
    }
}

/// How the two samples were drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// One Poisson clock drives both compound Poisson processes.
    SharedClock,
    /// Both processes consume the same random numbers row by row.
    CommonRandomNumbers,
    /// Independent substreams.
    Independent,
}

impl SamplingMode {
    pub fn is_paired(self) -> bool {
        !matches!(self, SamplingMode::Independent)
    }
}

/// Everything `run_comparison` produces.
#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    pub hypothesis: HypothesisReport,
    pub ordering: OrderingReport,
    pub verdict: CombinedVerdict,
    pub sampling: SamplingMode,
    /// Terminal values of the first and second process.
    pub x: SampleMatrix,
    pub y: SampleMatrix,
}

/// Hypothesis part of an experiment.
pub fn check_hypotheses(exp: &Experiment, stream: &RngStream) -> Result<HypothesisReport> {
    exp.validate()?;
    let mut report = match (&exp.process1, &exp.process2) {
        (Process::Gh(p1), Process::Gh(p2)) => {
            let case = exp.gh_case.expect("validated");
            check_gh_hypotheses(p1, p2, case)?
        }
        (p1, p2) => {
            let points = match &exp.state_points {
                Some(p) => p.clone(),
                None => default_state_points(p1, p2, exp.plan.horizon, &stream.substream(0))?,
            };
            check_table1_on(p1, p2, exp.class, &points)?
        }
    };
    report.assume_all(&exp.assumed_flags);
    Ok(report)
}

fn sampling_mode(p1: &Process, p2: &Process) -> SamplingMode {
    match (p1, p2) {
        (Process::CompoundPoisson(a), Process::CompoundPoisson(b)) => {
            let (l1, l2) = (a.spec.intensity, b.spec.intensity);
            if (l1 - l2).abs() <= 1e-12 * l1.max(l2) {
                SamplingMode::SharedClock
            } else {
                SamplingMode::Independent
            }
        }
        (Process::JumpDiffusion(a), Process::JumpDiffusion(b))
            if a.dim() == b.dim() && a.intensity_measure().is_some() == b.intensity_measure().is_some() =>
        {
            SamplingMode::CommonRandomNumbers
        }
        (Process::Levy(a), Process::Levy(b)) if measures_identical(&a.measure, &b.measure) => {
            SamplingMode::CommonRandomNumbers
        }
        _ => SamplingMode::Independent,
    }
}

fn sample_pair(exp: &Experiment, mode: SamplingMode, stream: &RngStream) -> Result<(SampleMatrix, SampleMatrix)> {
    let plan = &exp.plan;
    match (mode, &exp.process1, &exp.process2) {
        (SamplingMode::SharedClock, Process::CompoundPoisson(a), Process::CompoundPoisson(b)) => {
            let coupling = if a.spec.dim() == 1 { Coupling::SharedClockComonotone } else { Coupling::SharedClock };
            let paths = sample_compound_poisson_coupled(&a.spec, &b.spec, &[plan.horizon], plan.n, coupling, stream)?;
            Ok((paths.terminal1(), paths.terminal2()))
        }
        (SamplingMode::CommonRandomNumbers, p1, p2) => Ok((
            p1.sample_terminal(plan.horizon, plan.n, &plan.terminal, stream)?,
            p2.sample_terminal(plan.horizon, plan.n, &plan.terminal, stream)?,
        )),
        (_, p1, p2) => Ok((
            p1.sample_terminal(plan.horizon, plan.n, &plan.terminal, &stream.substream(1))?,
            p2.sample_terminal(plan.horizon, plan.n, &plan.terminal, &stream.substream(2))?,
        )),
    }
}

/// Runs the hypothesis check, samples both terminal laws and tests
/// `S_T <=_F S*_T` with the generated family of the experiment's class.
pub fn run_comparison(exp: &Experiment, stream: &RngStream) -> Result<ComparisonOutcome> {
    let ctx = format!("experiment `{}`", exp.name);
    let inner = || -> Result<ComparisonOutcome> {
        let hypothesis = check_hypotheses(exp, stream)?;
        let mode = sampling_mode(&exp.process1, &exp.process2);
        let (x, y) = sample_pair(exp, mode, stream)?;
        let pooled = SampleMatrix::new(x.dim(), x.as_slice().iter().chain(y.as_slice()).copied().collect())?;
        let family = generate_family(exp.class, x.dim(), exp.plan.anchors, Some(&pooled))?;
        if family.is_empty() {
            return invalid(format!(
                "the {} family is empty in dimension {}; compare for equality instead",
                exp.class,
                x.dim()
            ));
        }
        let config = OrderTestConfig { alpha: exp.alpha, paired: mode.is_paired(), ..Default::default() };
        let ordering = empirical_order_test(&x, &y, &family, &config)?.with_class(exp.class);
        let verdict = CombinedVerdict::combine(&hypothesis, ordering.verdict);
        Ok(ComparisonOutcome { hypothesis, ordering, verdict, sampling: mode, x, y })
    };
    inner().map_err(|e| e.with_context(&ctx))
}

/// A Brownian motion with drift `mu` and covariance `sigma`; its value at
/// time one is `N(mu, sigma)`.
pub fn normal_process(mu: Vec<f64>, sigma: DMatrix<f64>) -> Result<Process> {
    let d = mu.len();
    let zero = LevyMeasure::atomic(DiscreteMeasure::new(d, Vec::new())?)?;
    Ok(Process::Levy(LevyTriplet::new(mu, sigma, zero)?))
}

/// The ordering class each normal comparison result concludes: location
/// shift (ST), psd covariance (CX), entrywise covariance (DCX) and their
/// increasing versions (ICX, IDCX).
pub const NORMAL_CASES: [FunctionClass; 5] =
    [FunctionClass::St, FunctionClass::Cx, FunctionClass::Dcx, FunctionClass::Icx, FunctionClass::Idcx];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::process::CompoundPoissonProcess;
    use crate::levy::MeasureForm;
    use crate::orders::Verdict;
    use crate::levy::LevyDensity;

    fn normal_exp(s1: f64, s2: f64) -> Experiment {
        let p1 = normal_process(vec![0.0], DMatrix::from_element(1, 1, s1)).unwrap();
        let p2 = normal_process(vec![0.0], DMatrix::from_element(1, 1, s2)).unwrap();
        let mut e = Experiment::new("normal", p1, p2, FunctionClass::Cx);
        e.plan.n = 50_000;
        e
    }

    #[test]
    fn normal_variance_pair() {
        let out = run_comparison(&normal_exp(1.0, 2.0), &RngStream::new(3, 0)).unwrap();
        assert!(out.hypothesis.all_pass(), "{:?}", out.hypothesis);
        assert_eq!(out.sampling, SamplingMode::CommonRandomNumbers);
        assert_eq!(out.ordering.verdict, Verdict::Consistent);
        assert_eq!(out.verdict, CombinedVerdict::PredictedConfirmed);
    }

    #[test]
    fn reversed_pair_is_not_predicted_and_violated() {
        let out = run_comparison(&normal_exp(2.0, 1.0), &RngStream::new(3, 1)).unwrap();
        assert!(!out.hypothesis.predicted());
        assert_eq!(out.ordering.verdict, Verdict::Violation);
        assert_eq!(out.verdict, CombinedVerdict::NotPredicted);
    }

    #[test]
    fn compound_poisson_pair_uses_the_shared_clock() {
        let point = DiscreteMeasure::from_1d(&[(0.5, 1.0)]).unwrap();
        let unif = LevyDensity::new("U(0,1)", 0.0, 1.0, |_| 1.0).unwrap();
        let p1 = CompoundPoissonProcess::new(vec![0.0], 1.0, MeasureForm::Atomic(point)).unwrap();
        let p2 = CompoundPoissonProcess::new(vec![0.0], 1.0, MeasureForm::Density(unif)).unwrap();
        let mut e = Experiment::new("cp", Process::CompoundPoisson(p1), Process::CompoundPoisson(p2), FunctionClass::Cx);
        e.plan.n = 50_000;
        let out = run_comparison(&e, &RngStream::new(3, 2)).unwrap();
        assert_eq!(out.sampling, SamplingMode::SharedClock);
        assert!(out.hypothesis.all_pass(), "{:?}", out.hypothesis);
        assert_eq!(out.verdict, CombinedVerdict::PredictedConfirmed);
    }

    #[test]
    fn validation() {
        let p1 = normal_process(vec![0.0], DMatrix::identity(1, 1)).unwrap();
        let p2 = normal_process(vec![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let e = Experiment::new("bad", p1, p2, FunctionClass::Cx);
        assert!(run_comparison(&e, &RngStream::new(0, 0)).unwrap_err().to_string().contains("experiment `bad`"));
    }
}
