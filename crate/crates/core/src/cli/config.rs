//! JSON experiment configuration: schema, validation and conversion into
//! harness objects.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "output_dir": "results",
//!   "parallelism": 4,
//!   "n": 100000,
//!   "alpha": 0.01,
//!   "experiments": [
//!     { "name": "normal-cx", "test": { "kind": "comparison", "class": "CX",
//!       "process1": { "type": "levy", "drift": [0], "sigma": [[1]] },
//!       "process2": { "type": "levy", "drift": [0], "sigma": [[2]] } } }
//!   ]
//! }
//! ```

use crate::error::{invalid, Error, Result};
use crate::harness::{
    CompoundPoissonProcess, DriftData, Experiment, GhCase, NigExample, NigExampleParams, Process, SamplingPlan,
    StatePoints, TerminalSampling,
};
use crate::jumpdiff::{IntensityMeasure, JumpDiffusionSpec, JumpLink, JumpShape, ScalarField};
use crate::levy::{LevyMeasure, LevyTriplet, MeasureForm};
use crate::markov::{FiniteChainSpec, FiniteKernel};
use crate::orders::{Atom, DiscreteMeasure, FunctionClass};
use crate::samplers::GhParams;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}
fn default_parallelism() -> usize {
    1
}
fn default_n() -> usize {
    100_000
}
fn default_alpha() -> f64 {
    0.01
}
fn default_horizon() -> f64 {
    1.0
}
fn default_anchors() -> usize {
    7
}
fn default_truncation() -> f64 {
    TerminalSampling::default().truncation
}
fn default_euler_steps() -> usize {
    TerminalSampling::default().euler_steps
}
fn default_one() -> f64 {
    1.0
}

/// Top-level configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Master seed; every experiment derives its stream from it.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Number of experiments run concurrently (and worker threads).
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Default sample size per process.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Default significance level.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub experiments: Vec<ExperimentDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentDef {
    pub name: String,
    /// Overrides the global sample size.
    #[serde(default)]
    pub n: Option<usize>,
    /// Overrides the global significance level.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Hypotheses asserted without machine verification.
    #[serde(default)]
    pub assumed_flags: Vec<String>,
    pub test: TestDef,
}

/// What an experiment does.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestDef {
    /// Characteristic (or GH parameter) check plus terminal-value order test.
    Comparison {
        class: FunctionClass,
        process1: ProcessDef,
        process2: ProcessDef,
        #[serde(default = "default_horizon")]
        horizon: f64,
        #[serde(default = "default_anchors")]
        anchors: usize,
        #[serde(default)]
        gh_case: Option<GhCase>,
        #[serde(default)]
        state_points: Option<StatePointsDef>,
        #[serde(default = "default_truncation")]
        truncation: f64,
        #[serde(default = "default_euler_steps")]
        euler_steps: usize,
    },
    /// Convex ordering of NIG laws in `alpha` or `delta`.
    NigExample {
        example: NigExample,
        first: f64,
        second: f64,
        shared: f64,
        #[serde(default)]
        beta: f64,
        #[serde(default)]
        mean: f64,
        #[serde(default = "default_horizon")]
        horizon: f64,
    },
    /// Compound Poisson approximations along `eps_n = 2^-n`.
    TruncationSweep {
        class: FunctionClass,
        measure1: MeasureDef,
        measure2: MeasureDef,
        drift: DriftData,
        levels: Vec<u32>,
        #[serde(default = "default_horizon")]
        horizon: f64,
        #[serde(default = "default_anchors")]
        anchors: usize,
    },
    /// NIG processes compared at `(T/2, T)` with componentwise ICX functions.
    NigTwoTime {
        process1: GhDef,
        process2: GhDef,
        case: GhCase,
        #[serde(default = "default_horizon")]
        horizon: f64,
        #[serde(default = "default_anchors")]
        anchors: usize,
    },
    /// Exact finite-dimensional comparison of two finite Markov chains
    /// through a separating monotone kernel.
    Markov {
        class: FunctionClass,
        states: Vec<f64>,
        initial1: Vec<f64>,
        initial2: Vec<f64>,
        kernel1: Vec<Vec<f64>>,
        kernel: Vec<Vec<f64>>,
        kernel2: Vec<Vec<f64>>,
        /// Number of time points `m`.
        points: usize,
    },
    /// Monte-Carlo estimate of `E[g(S_T) | S_t = s]` and a finite-difference
    /// check that it stays in the class.
    Propagation {
        class: FunctionClass,
        process: JumpDiffusionDef,
        payoff: ScalarFnDef,
        grid: GridDef,
        times: Vec<f64>,
        #[serde(default = "default_horizon")]
        horizon: f64,
        #[serde(default = "default_euler_steps")]
        steps: usize,
        /// Share of finite-difference checks allowed to fail before the
        /// slice family counts as violated (the false-positive allowance of
        /// the 3-standard-error rule over many cells).
        #[serde(default = "default_violation_allowance")]
        max_violation_fraction: f64,
    },
}

fn default_violation_allowance() -> f64 {
    0.05
}

impl TestDef {
    pub fn kind(&self) -> &'static str {
        match self {
            TestDef::Comparison { .. } => "comparison",
            TestDef::NigExample { .. } => "nig_example",
            TestDef::TruncationSweep { .. } => "truncation_sweep",
            TestDef::NigTwoTime { .. } => "nig_two_time",
            TestDef::Markov { .. } => "markov",
            TestDef::Propagation { .. } => "propagation",
        }
    }
}

/// `f(x) = intercept + slope x + hinge max(x - knot, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarFnDef {
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub hinge: f64,
    #[serde(default)]
    pub knot: f64,
}

impl ScalarFnDef {
    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x + self.hinge * (x - self.knot).max(0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.slope == 0.0 && self.hinge == 0.0
    }
}

/// Equally spaced state grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDef {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePointsDef {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// A Lévy or intensity measure on the line (atomic measures may live in
/// `R^d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureDef {
    Zero {
        #[serde(default = "one_dim")]
        dim: usize,
    },
    /// Inline atoms `(point, weight)`.
    Atomic { atoms: Vec<(Vec<f64>, f64)> },
    /// CSV file with one atom per line: point coordinates, then the weight.
    /// Relative paths resolve against the config file.
    AtomicCsv { path: PathBuf },
    Nig { alpha: f64, beta: f64, delta: f64 },
    TemperedStable { c_neg: f64, c_pos: f64, a: f64, l_neg: f64, l_pos: f64 },
    Uniform {
        lower: f64,
        upper: f64,
        #[serde(default = "default_one")]
        mass: f64,
    },
}

fn one_dim() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhDef {
    #[serde(default = "minus_half")]
    pub lambda: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub delta: f64,
    pub mu: Vec<f64>,
    /// Defaults to the identity.
    #[serde(default)]
    pub dispersion: Option<Vec<Vec<f64>>>,
}

fn minus_half() -> f64 {
    -0.5
}

impl GhDef {
    pub fn build(&self) -> Result<GhParams> {
        let d = self.mu.len();
        let disp = self
            .dispersion
            .clone()
            .unwrap_or_else(|| (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect());
        GhParams::new(self.lambda, self.alpha, self.beta.clone(), self.delta, self.mu.clone(), disp)
    }
}

/// Jumps `varphi(s) psi(y)` driven by a finite intensity measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpsDef {
    #[serde(default = "unit_fn")]
    pub phi: ScalarFnDef,
    #[serde(default = "identity_fn")]
    pub psi: ScalarFnDef,
    pub intensity: MeasureDef,
}

fn unit_fn() -> ScalarFnDef {
    ScalarFnDef { intercept: 1.0, ..Default::default() }
}
fn identity_fn() -> ScalarFnDef {
    ScalarFnDef { slope: 1.0, ..Default::default() }
}

/// One-dimensional jump diffusion with coefficient functions of the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpDiffusionDef {
    #[serde(default)]
    pub s0: f64,
    #[serde(default)]
    pub drift: ScalarFnDef,
    pub diffusion: ScalarFnDef,
    #[serde(default)]
    pub jumps: Option<JumpsDef>,
}

/// One side of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessDef {
    Levy {
        drift: Vec<f64>,
        /// Covariance matrix of the Gaussian part.
        sigma: Vec<Vec<f64>>,
        #[serde(default)]
        measure: Option<MeasureDef>,
    },
    CompoundPoisson {
        #[serde(default)]
        drift: Option<Vec<f64>>,
        intensity: f64,
        /// Jump law (total mass one).
        law: MeasureDef,
    },
    JumpDiffusion(JumpDiffusionDef),
    Gh(GhDef),
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return invalid(format!("{what} must be a nonempty square matrix"));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn read_atoms_csv(path: &Path) -> Result<DiscreteMeasure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let mut atoms = Vec::new();
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let v = match parsed {
            Ok(v) => v,
            // a header line
            Err(_) if atoms.is_empty() => continue,
            Err(e) => return invalid(format!("{}:{}: {e}", path.display(), lineno + 1)),
        };
        if v.len() < 2 {
            return invalid(format!("{}:{}: need point coordinates and a weight", path.display(), lineno + 1));
        }
        let d = v.len() - 1;
        if *dim.get_or_insert(d) != d {
            return invalid(format!("{}:{}: inconsistent number of columns", path.display(), lineno + 1));
        }
        atoms.push(Atom { point: v[..d].to_vec(), weight: v[d] });
    }
    DiscreteMeasure::new(dim.unwrap_or(1), atoms)
}

impl MeasureDef {
    pub fn build(&self, base: &Path) -> Result<LevyMeasure> {
        match self {
            MeasureDef::Zero { dim } => LevyMeasure::zero(*dim),
            MeasureDef::Atomic { atoms } => {
                let d = atoms.first().map_or(1, |a| a.0.len());
                LevyMeasure::atomic(DiscreteMeasure::new(
                    d,
                    atoms.iter().map(|(p, w)| Atom { point: p.clone(), weight: *w }).collect(),
                )?)
            }
            MeasureDef::AtomicCsv { path } => LevyMeasure::atomic(read_atoms_csv(&base.join(path))?),
            MeasureDef::Nig { alpha, beta, delta } => LevyMeasure::nig(*alpha, *beta, *delta),
            MeasureDef::TemperedStable { c_neg, c_pos, a, l_neg, l_pos } => {
                LevyMeasure::tempered_stable(*c_neg, *c_pos, *a, *l_neg, *l_pos)
            }
            MeasureDef::Uniform { lower, upper, mass } => LevyMeasure::uniform(*lower, *upper, *mass),
        }
    }

    /// The measure as a finite intensity on the line.
    pub fn intensity(&self, base: &Path) -> Result<IntensityMeasure> {
        let m = self.build(base)?;
        if m.declared_infinite_mass {
            return invalid("jump intensities must be finite measures");
        }
        match m.form {
            MeasureForm::Atomic(d) => Ok(IntensityMeasure::Atomic(d)),
            MeasureForm::Density(d) => Ok(IntensityMeasure::Density(d)),
        }
    }
}

impl JumpDiffusionDef {
    pub fn build(&self, base: &Path) -> Result<JumpDiffusionSpec> {
        let homogeneous = self.drift.is_constant()
            && self.diffusion.is_constant()
            && self.jumps.as_ref().is_none_or(|j| j.phi.is_constant());
        let mut spec = if homogeneous {
            JumpDiffusionSpec::levy(
                vec![self.s0],
                vec![self.drift.intercept],
                DMatrix::from_element(1, 1, self.diffusion.intercept),
            )?
        } else {
            let (b, s) = (self.drift, self.diffusion);
            JumpDiffusionSpec::scalar(self.s0, move |_, x| b.eval(x), move |_, x| s.eval(x))
        };
        if let Some(j) = &self.jumps {
            let intensity = j.intensity(base)?;
            let psi_def = j.psi;
            if homogeneous {
                let c = j.phi.intercept;
                let psi: JumpShape = Arc::new(move |_, y, out| out[0] = c * psi_def.eval(y));
                spec = spec.with_additive_jumps(psi, intensity)?;
            } else {
                let phi_def = j.phi;
                let phi: ScalarField = Arc::new(move |_, s| phi_def.eval(s[0]));
                let psi: JumpShape = Arc::new(move |_, y, out| out[0] = psi_def.eval(y));
                spec = spec.with_jumps(JumpLink::Factored { phi, psi }, intensity)?;
            }
        }
        Ok(spec.with_label("config"))
    }
}

impl JumpsDef {
    fn intensity(&self, base: &Path) -> Result<IntensityMeasure> {
        self.intensity.intensity(base)
    }
}

impl ProcessDef {
    pub fn dim(&self) -> usize {
        match self {
            ProcessDef::Levy { drift, .. } => drift.len(),
            ProcessDef::CompoundPoisson { law, drift, .. } => match (drift, law) {
                (Some(d), _) => d.len(),
                (None, MeasureDef::Atomic { atoms }) => atoms.first().map_or(1, |a| a.0.len()),
                (None, MeasureDef::Zero { dim }) => *dim,
                _ => 1,
            },
            ProcessDef::JumpDiffusion(_) => 1,
            ProcessDef::Gh(g) => g.mu.len(),
        }
    }

    pub fn build(&self, base: &Path) -> Result<Process> {
        match self {
            ProcessDef::Levy { drift, sigma, measure } => {
                let d = drift.len();
                let m = match measure {
                    Some(m) => m.build(base)?,
                    None => LevyMeasure::zero(d)?,
                };
                Ok(Process::Levy(LevyTriplet::new(drift.clone(), matrix(sigma, "sigma")?, m)?))
            }
            ProcessDef::CompoundPoisson { drift, intensity, law } => {
                let law = law.build(base)?;
                let d = law.dim();
                let drift = drift.clone().unwrap_or_else(|| vec![0.0; d]);
                Ok(Process::CompoundPoisson(CompoundPoissonProcess::new(drift, *intensity, law.form)?))
            }
            ProcessDef::JumpDiffusion(j) => Ok(Process::JumpDiffusion(j.build(base)?)),
            ProcessDef::Gh(g) => Ok(Process::Gh(g.build()?)),
        }
    }
}

/// Errors produced while loading a configuration, with the JSON path of the
/// offending key when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.pointer.is_empty() || self.pointer == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "at `{}`: {}", self.pointer, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn cfg_err(pointer: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { pointer: pointer.into(), message: message.into() }
}

/// A parsed configuration and where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    /// See [`config_digest`].
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str) -> std::result::Result<Config, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        cfg_err(path, e.into_inner().to_string())
    })?;
    validate(&config)?;
    Ok(config)
}

/// Reads, parses and validates a configuration file.
pub fn parse_config(path: &Path) -> std::result::Result<LoadedConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| cfg_err("", format!("cannot read {}: {e}", path.display())))?;
    let config = parse_config_str(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let digest = config_digest(&config);
    Ok(LoadedConfig { config, base_dir, digest })
}

/// SHA-256 of the canonical serialization of everything that influences
/// results: seed, defaults and experiments. Output directory and
/// parallelism are execution details and do not enter the digest.
pub fn config_digest(c: &Config) -> String {
    let canonical = serde_json::json!({
        "seed": c.seed,
        "n": c.n,
        "alpha": c.alpha,
        "experiments": c.experiments,
    });
    sha256_hex(canonical.to_string().as_bytes())
}

fn validate(c: &Config) -> std::result::Result<(), ConfigError> {
    if c.parallelism == 0 {
        return Err(cfg_err("parallelism", "must be at least 1"));
    }
    if c.n < 2 {
        return Err(cfg_err("n", "must be at least 2"));
    }
    if !(c.alpha > 0.0 && c.alpha < 1.0) {
        return Err(cfg_err("alpha", "must lie in (0, 1)"));
    }
    if c.experiments.is_empty() {
        return Err(cfg_err("experiments", "at least one experiment is required"));
    }
    let mut seen = HashSet::new();
    for (i, e) in c.experiments.iter().enumerate() {
        let at = |k: &str| format!("experiments[{i}].{k}");
        if e.name.trim().is_empty() {
            return Err(cfg_err(at("name"), "experiment names must be nonempty"));
        }
        if !e.name.chars().all(|ch| ch.is_ascii_alphanumeric() || "-_.".contains(ch)) || e.name.starts_with('.') {
            return Err(cfg_err(at("name"), format!("`{}` may only use letters, digits, `-`, `_` and `.`", e.name)));
        }
        if !seen.insert(e.name.as_str()) {
            return Err(cfg_err(at("name"), format!("duplicate experiment name `{}`", e.name)));
        }
        if let Some(n) = e.n {
            if n < 2 {
                return Err(cfg_err(at("n"), "must be at least 2"));
            }
        }
        if let Some(a) = e.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(cfg_err(at("alpha"), "must lie in (0, 1)"));
            }
        }
        if let TestDef::Comparison { process1, process2, .. } = &e.test {
            if process1.dim() != process2.dim() {
                return Err(cfg_err(
                    at("test.process2"),
                    format!("dimension {} differs from process1 ({})", process2.dim(), process1.dim()),
                ));
            }
        }
    }
    Ok(())
}

impl Config {
    pub fn experiment(&self, name: &str) -> Option<&ExperimentDef> {
        self.experiments.iter().find(|e| e.name == name)
    }
}

impl ExperimentDef {
    /// Stream index derived from the name, so adding or reordering
    /// experiments leaves every other experiment's randomness unchanged.
    pub fn stream_index(&self) -> u64 {
        let d = Sha256::digest(self.name.as_bytes());
        u64::from_le_bytes(d[..8].try_into().expect("eight bytes"))
    }
}

/// A comparison experiment built from its definition.
pub fn build_comparison(def: &ExperimentDef, config: &Config, base: &Path) -> Result<Experiment> {
    let TestDef::Comparison {
        class,
        process1,
        process2,
        horizon,
        anchors,
        gh_case,
        state_points,
        truncation,
        euler_steps,
    } = &def.test
    else {
        return invalid("not a comparison experiment");
    };
    let mut exp = Experiment::new(def.name.clone(), process1.build(base)?, process2.build(base)?, *class);
    exp.plan = SamplingPlan {
        n: def.n.unwrap_or(config.n),
        horizon: *horizon,
        anchors: *anchors,
        terminal: TerminalSampling { truncation: *truncation, euler_steps: *euler_steps },
    };
    exp.alpha = def.alpha.unwrap_or(config.alpha);
    exp.assumed_flags = def.assumed_flags.clone();
    exp.gh_case = *gh_case;
    exp.state_points = state_points.as_ref().map(|s| StatePoints { times: s.times.clone(), states: s.states.clone() });
    Ok(exp)
}

pub fn nig_params(def: &TestDef) -> Option<(NigExample, NigExampleParams)> {
    match def {
        TestDef::NigExample { example, first, second, shared, beta, mean, horizon } => Some((
            *example,
            NigExampleParams { first: *first, second: *second, shared: *shared, beta: *beta, mean: *mean, horizon: *horizon },
        )),
        _ => None,
    }
}

/// Both chains and the separating kernel of a Markov experiment.
pub fn build_chains(def: &TestDef) -> Result<(FiniteChainSpec, FiniteKernel, FiniteChainSpec)> {
    let TestDef::Markov { states, initial1, initial2, kernel1, kernel, kernel2, points, .. } = def else {
        return invalid("not a Markov experiment");
    };
    let q1 = FiniteKernel::new(states.clone(), kernel1.clone())?;
    let q = FiniteKernel::new(states.clone(), kernel.clone())?;
    let q2 = FiniteKernel::new(states.clone(), kernel2.clone())?;
    Ok((FiniteChainSpec::new(initial1.clone(), q1, *points)?, q, FiniteChainSpec::new(initial2.clone(), q2, *points)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "seed": 1,
        "experiments": [
            { "name": "a", "test": { "kind": "comparison", "class": "CX",
              "process1": { "type": "levy", "drift": [0], "sigma": [[1]] },
              "process2": { "type": "levy", "drift": [0], "sigma": [[2]] } } }
        ]
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.n, 100_000);
        assert_eq!(c.alpha, 0.01);
        assert_eq!(c.parallelism, 1);
        assert_eq!(c.output_dir, PathBuf::from("results"));
        let TestDef::Comparison { horizon, anchors, .. } = &c.experiments[0].test else { panic!() };
        assert_eq!((*horizon, *anchors), (1.0, 7));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let text = MINIMAL.replace(
            "]\n    }",
            r#", { "name": "a", "test": { "kind": "markov", "class": "ST", "states": [0, 1],
                "initial1": [1, 0], "initial2": [1, 0], "kernel1": [[1, 0], [0, 1]],
                "kernel": [[1, 0], [0, 1]], "kernel2": [[1, 0], [0, 1]], "points": 2 } } ]
    }"#,
        );
        let e = parse_config_str(&text).unwrap_err();
        assert_eq!(e.pointer, "experiments[1].name");
        assert!(e.message.contains("duplicate experiment name `a`"), "{e}");
    }

    #[test]
    fn missing_seed_and_unknown_keys() {
        let e = parse_config_str(&MINIMAL.replace("\"seed\": 1,", "")).unwrap_err();
        assert!(e.message.contains("missing field `seed`"), "{e}");
        let e = parse_config_str(&MINIMAL.replace("\"class\": \"CX\"", "\"class\": \"CX\", \"bogus\": 3")).unwrap_err();
        assert!(e.pointer.starts_with("experiments[0].test"), "{e}");
        assert!(e.message.contains("bogus"), "{e}");
    }

    #[test]
    fn stream_index_depends_only_on_the_name() {
        let c = parse_config_str(MINIMAL).unwrap();
        let mut other = c.experiments[0].clone();
        other.n = Some(10);
        assert_eq!(c.experiments[0].stream_index(), other.stream_index());
        other.name = "b".into();
        assert_ne!(c.experiments[0].stream_index(), other.stream_index());
    }

    #[test]
    fn atomic_csv_measures() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("atoms.csv"), "point,weight\n0.5,1\n1.5,2\n").unwrap();
        let m = MeasureDef::AtomicCsv { path: "atoms.csv".into() }.build(dir.path()).unwrap();
        let MeasureForm::Atomic(d) = m.form else { panic!() };
        assert_eq!(d.mass(), 3.0);
        assert_eq!(d.first_moment(), vec![3.5]);
    }

    #[test]
    fn scalar_functions() {
        let f = ScalarFnDef { intercept: 0.05, slope: 0.0, hinge: 0.2, knot: 0.0 };
        assert_eq!(f.eval(-1.0), 0.05);
        assert!((f.eval(1.0) - 0.25).abs() < 1e-15);
        assert!(!f.is_constant());
    }
}
