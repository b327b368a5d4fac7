//! Diffusions with jumps
//! `dS = b(t, S) dt + sigma(t, S) dW + int phi(t, S-, y) (N(dt, dy) - lambda(dy) dt)`
//! with a finite intensity measure `lambda` and a factorized jump link.
//!
//! Provides the Euler scheme with a Bernoulli jump indicator per step, the
//! one-step transition operator, nested Monte-Carlo estimates of the
//! propagation operator `G(t, s) = E[g(S_T) | S_t = s]`, finite-difference
//! checks that `G(t, .)` stays in an ordering class, and the residual of the
//! Kolmogorov backward equation for tabulated or analytic `G`.

use crate::error::{invalid, Error, Result};
use crate::levy::{JumpTable, LevyDensity};
use crate::orders::{DiscreteMeasure, FunctionClass, Verdict};
use crate::quadrature::integrate_range;
use crate::sample::SampleMatrix;
use crate::samplers::{fill_rows, map_rows, RngStream};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

/// `(t, s) -> scalar`.
pub type ScalarField = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// `(t, s, out)`; writes a vector (or a row-major matrix) into `out`.
pub type VectorField = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, y, out)`; writes the `d`-dimensional jump shape for mark `y`.
pub type JumpShape = Arc<dyn Fn(f64, f64, &mut [f64]) + Send + Sync>;
/// `(t, y) -> scalar` jump shape (one-dimensional sums of products).
pub type ScalarShape = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Relative accuracy of the compensator quadrature.
const COMPENSATOR_REL_TOL: f64 = 1e-10;

/// A finite intensity measure on the real line.
#[derive(Debug, Clone)]
pub enum IntensityMeasure {
    Atomic(DiscreteMeasure),
    Density(LevyDensity),
}

impl IntensityMeasure {
    /// `int f(y) lambda(dy)`.
    pub fn integral<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        match self {
            Self::Atomic(m) => Ok(m.atoms().iter().map(|a| a.weight * f(a.point[0])).sum()),
            Self::Density(d) => {
                let g = |y: f64| {
                    let w = d.eval(y);
                    if w == 0.0 {
                        0.0
                    } else {
                        w * f(y)
                    }
                };
                let mut total = 0.0;
                if d.lower < 0.0 {
                    total += integrate_range(g, d.lower, d.upper.min(0.0), COMPENSATOR_REL_TOL)?.value;
                }
                if d.upper > 0.0 {
                    total += integrate_range(g, d.lower.max(0.0), d.upper, COMPENSATOR_REL_TOL)?.value;
                }
                Ok(total)
            }
        }
    }

    /// `lambda(R)`.
    pub fn mass(&self) -> Result<f64> {
        self.integral(|_| 1.0)
    }

    /// `E f(Y)` for `Y ~ lambda / lambda(R)`.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        Ok(self.integral(f)? / self.mass()?)
    }

    fn table(&self) -> Result<JumpTable> {
        match self {
            Self::Atomic(m) => JumpTable::from_discrete(m),
            Self::Density(d) => JumpTable::from_density(d),
        }
    }

    fn validate(&self) -> Result<f64> {
        if let Self::Atomic(m) = self {
            if m.dim() != 1 {
                return invalid("intensity measure must live on the real line");
            }
        }
        let mass = self.mass()?;
        if !(mass > 0.0 && mass.is_finite()) {
            return invalid(format!("intensity measure must have finite positive mass, got {mass}"));
        }
        Ok(mass)
    }
}

/// Factorized jump links.
#[derive(Clone)]
pub enum JumpLink {
    /// `phi(t, s, y) = varphi(t, s) psi(t, y)` with `varphi >= 0`.
    Factored { phi: ScalarField, psi: JumpShape },
    /// `phi(t, s, y) = sum_i varphi_i(t, s) psi_i(t, y)`, one-dimensional.
    SumFactored { terms: Vec<(ScalarField, ScalarShape)> },
}

#[derive(Clone)]
struct Jumps {
    link: JumpLink,
    intensity: IntensityMeasure,
    mass: f64,
    table: Arc<JumpTable>,
}

/// A jump diffusion with coefficient functions, a jump link and an initial
/// value.
#[derive(Clone)]
pub struct JumpDiffusionSpec {
    pub label: String,
    pub s0: Vec<f64>,
    drift: VectorField,
    diffusion: VectorField,
    jumps: Option<Jumps>,
    homogeneous: bool,
}

impl fmt::Debug for JumpDiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpDiffusionSpec")
            .field("label", &self.label)
            .field("s0", &self.s0)
            .field("jump_intensity", &self.jump_intensity())
            .field("spatially_homogeneous", &self.homogeneous)
            .finish()
    }
}

impl JumpDiffusionSpec {
    /// General coefficients: `drift` writes `b(t, s)` (length `d`) and
    /// `diffusion` writes `sigma(t, s)` row-major (length `d * d`).
    pub fn new(s0: Vec<f64>, drift: VectorField, diffusion: VectorField) -> Result<Self> {
        if s0.is_empty() {
            return invalid("initial value must have at least one component");
        }
        Ok(Self { label: String::new(), s0, drift, diffusion, jumps: None, homogeneous: false })
    }

    /// One-dimensional convenience constructor from `b(t, s)` and `sigma(t, s)`.
    pub fn scalar<B, S>(s0: f64, b: B, sigma: S) -> Self
    where
        B: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let drift: VectorField = Arc::new(move |t, s, out| out[0] = b(t, s[0]));
        let diffusion: VectorField = Arc::new(move |t, s, out| out[0] = sigma(t, s[0]));
        Self { label: String::new(), s0: vec![s0], drift, diffusion, jumps: None, homogeneous: false }
    }

    /// Constant coefficients (a Lévy-type, spatially homogeneous spec).
    pub fn levy(s0: Vec<f64>, drift: Vec<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let d = s0.len();
        if d == 0 || drift.len() != d || sigma.nrows() != d || sigma.ncols() != d {
            return invalid("initial value, drift and diffusion matrix dimensions disagree");
        }
        let flat: Vec<f64> = (0..d * d).map(|k| sigma[(k / d, k % d)]).collect();
        let drift_f: VectorField = Arc::new(move |_, _, out| out.copy_from_slice(&drift));
        let diff_f: VectorField = Arc::new(move |_, _, out| out.copy_from_slice(&flat));
        Ok(Self { label: String::new(), s0, drift: drift_f, diffusion: diff_f, jumps: None, homogeneous: true })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Adds a jump part with the given link. A state-dependent link makes
    /// the spec spatially inhomogeneous.
    pub fn with_jumps(mut self, link: JumpLink, intensity: IntensityMeasure) -> Result<Self> {
        if let JumpLink::SumFactored { terms } = &link {
            if self.dim() != 1 {
                return invalid("sums of factorized jump links are only defined in dimension 1");
            }
            if terms.is_empty() {
                return invalid("sum-factorized jump link needs at least one term");
            }
        }
        let mass = intensity.validate()?;
        let table = Arc::new(intensity.table()?);
        self.jumps = Some(Jumps { link, intensity, mass, table });
        self.homogeneous = false;
        Ok(self)
    }

    /// Adds state-independent jumps `psi(t, Y)` (link factor 1), preserving
    /// spatial homogeneity.
    pub fn with_additive_jumps(self, psi: JumpShape, intensity: IntensityMeasure) -> Result<Self> {
        let homogeneous = self.homogeneous;
        let one: ScalarField = Arc::new(|_, _| 1.0);
        let mut out = self.with_jumps(JumpLink::Factored { phi: one, psi }, intensity)?;
        out.homogeneous = homogeneous;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.s0.len()
    }

    /// True for constant coefficients with state-independent jumps.
    pub fn is_spatially_homogeneous(&self) -> bool {
        self.homogeneous
    }

    /// `lambda(R)`, zero without jumps.
    pub fn jump_intensity(&self) -> f64 {
        self.jumps.as_ref().map_or(0.0, |j| j.mass)
    }

    pub fn intensity_measure(&self) -> Option<&IntensityMeasure> {
        self.jumps.as_ref().map(|j| &j.intensity)
    }

    pub fn drift_at(&self, t: f64, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        (self.drift)(t, s, &mut out);
        out
    }

    pub fn diffusion_at(&self, t: f64, s: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        (self.diffusion)(t, s, &mut out);
        DMatrix::from_row_slice(d, d, &out)
    }

    /// `c = sigma sigma^T`.
    pub fn covariance_at(&self, t: f64, s: &[f64]) -> DMatrix<f64> {
        let sig = self.diffusion_at(t, s);
        &sig * sig.transpose()
    }

    /// Jump size `phi(t, s, y)`; zero without jumps.
    pub fn jump_at(&self, t: f64, s: &[f64], y: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let Some(j) = &self.jumps else { return };
        match &j.link {
            JumpLink::Factored { phi, psi } => {
                let p = phi(t, s);
                psi(t, y, out);
                out.iter_mut().for_each(|v| *v *= p);
            }
            JumpLink::SumFactored { terms } => {
                out[0] = terms.iter().map(|(phi, psi)| phi(t, s) * psi(t, y)).sum();
            }
        }
    }

    /// The jump kernel `K(s, .)` (image of `lambda` under `y -> phi(t, s, y)`)
    /// for an atomic intensity measure; `None` otherwise. Marks mapped to a
    /// zero jump are kept as an atom at the origin.
    pub fn jump_kernel_atomic(&self, t: f64, s: &[f64]) -> Result<Option<DiscreteMeasure>> {
        let Some(j) = &self.jumps else { return Ok(None) };
        let IntensityMeasure::Atomic(m) = &j.intensity else { return Ok(None) };
        let d = self.dim();
        let mut buf = vec![0.0; d];
        let pts: Vec<(Vec<f64>, f64)> = m
            .atoms()
            .iter()
            .map(|a| {
                self.jump_at(t, s, a.point[0], &mut buf);
                (buf.clone(), a.weight)
            })
            .collect();
        Ok(Some(DiscreteMeasure::from_points(&pts)?))
    }
}

/// Time discretization and sample size for the Euler scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerConfig {
    pub t0: f64,
    pub t_end: f64,
    /// Number of equidistant steps `K` on `[t0, t_end]`.
    pub steps: usize,
    /// Number of paths.
    pub n: usize,
    pub stream: RngStream,
    /// Keep every grid value (`(K + 1) d` columns) instead of terminal values.
    #[serde(default)]
    pub record_full: bool,
}

impl EulerConfig {
    pub fn new(t0: f64, t_end: f64, steps: usize, n: usize, stream: RngStream) -> Self {
        Self { t0, t_end, steps, n, stream, record_full: false }
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.steps as f64
    }

    /// Grid `t_i = t0 + i (T - t0) / K`, `i = 0..=K`.
    pub fn times(&self) -> Vec<f64> {
        euler_times(self.t0, self.t_end, self.steps)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t0 >= 0.0 && self.t0 < self.t_end && self.t_end.is_finite()) {
            return invalid(format!("need 0 <= t0 < T, got t0 = {}, T = {}", self.t0, self.t_end));
        }
        if self.steps == 0 {
            return invalid("Euler scheme needs at least one step");
        }
        Ok(())
    }
}

fn euler_times(t0: f64, t_end: f64, steps: usize) -> Vec<f64> {
    let dt = (t_end - t0) / steps as f64;
    (0..=steps).map(|i| if i == steps { t_end } else { t0 + i as f64 * dt }).collect()
}

/// A discretized spec: step times and per-step compensators.
struct Scheme<'a> {
    spec: &'a JumpDiffusionSpec,
    times: Vec<f64>,
    /// Per step: `E psi(t_i, Y)` (vector for FACTORED, one value per term
    /// for SUM_FACTORED).
    compensators: Vec<Vec<f64>>,
    negative_factor: AtomicBool,
}

struct Scratch {
    b: Vec<f64>,
    sig: Vec<f64>,
    z: Vec<f64>,
    shape: Vec<f64>,
    next: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Self { b: vec![0.0; d], sig: vec![0.0; d * d], z: vec![0.0; d], shape: vec![0.0; d], next: vec![0.0; d] }
    }
}

impl<'a> Scheme<'a> {
    fn new(spec: &'a JumpDiffusionSpec, times: Vec<f64>) -> Result<Self> {
        let mut compensators = Vec::with_capacity(times.len().saturating_sub(1));
        if let Some(j) = &spec.jumps {
            for w in times.windows(2) {
                let (t, dt) = (w[0], w[1] - w[0]);
                if j.mass * dt >= 1.0 {
                    return invalid(format!(
                        "jump probability lambda(R) dt = {} must be below 1; use more steps",
                        j.mass * dt
                    ));
                }
                compensators.push(compensator(spec.dim(), j, t)?);
            }
        }
        Ok(Self { spec, times, compensators, negative_factor: AtomicBool::new(false) })
    }

    fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// One Euler step from `s` at grid index `i`. Always consumes the same
    /// number of random draws, so paths started from different states share
    /// their noise under a common stream.
    fn step(&self, rng: &mut ChaCha8Rng, i: usize, s: &mut [f64], w: &mut Scratch) {
        let spec = self.spec;
        let d = spec.dim();
        let t = self.times[i];
        let dt = self.times[i + 1] - t;
        let sq = dt.sqrt();
        (spec.drift)(t, s, &mut w.b);
        (spec.diffusion)(t, s, &mut w.sig);
        for zi in w.z.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *zi = g * sq;
        }
        for r in 0..d {
            let mut acc = s[r] + w.b[r] * dt;
            for c in 0..d {
                acc += w.sig[r * d + c] * w.z[c];
            }
            w.next[r] = acc;
        }
        if let Some(j) = &spec.jumps {
            let u_jump: f64 = rng.random();
            let u_mark: f64 = rng.random();
            let jump = u_jump < j.mass * dt;
            let y = if jump { j.table.quantile(u_mark) } else { 0.0 };
            let comp = &self.compensators[i];
            let scale = j.mass * dt;
            match &j.link {
                JumpLink::Factored { phi, psi } => {
                    let p = phi(t, s);
                    if p < 0.0 {
                        self.negative_factor.store(true, Ordering::Relaxed);
                    }
                    if jump {
                        psi(t, y, &mut w.shape);
                    }
                    for r in 0..d {
                        if jump {
                            w.next[r] += p * w.shape[r];
                        }
                        w.next[r] -= p * comp[r] * scale;
                    }
                }
                JumpLink::SumFactored { terms } => {
                    for (k, (phi, psi)) in terms.iter().enumerate() {
                        let p = phi(t, s);
                        if p < 0.0 {
                            self.negative_factor.store(true, Ordering::Relaxed);
                        }
                        if jump {
                            w.next[0] += p * psi(t, y);
                        }
                        w.next[0] -= p * comp[k] * scale;
                    }
                }
            }
        }
        s.copy_from_slice(&w.next);
    }

    fn check(&self) -> Result<()> {
        if self.negative_factor.load(Ordering::Relaxed) {
            return invalid("jump link factor varphi(t, s) returned a negative value");
        }
        Ok(())
    }
}

fn compensator(d: usize, j: &Jumps, t: f64) -> Result<Vec<f64>> {
    match &j.link {
        JumpLink::Factored { psi, .. } => (0..d)
            .map(|r| {
                j.intensity.expectation(|y| {
                    let mut buf = vec![0.0; d];
                    psi(t, y, &mut buf);
                    buf[r]
                })
            })
            .collect(),
        JumpLink::SumFactored { terms } => terms.iter().map(|(_, psi)| j.intensity.expectation(|y| psi(t, y))).collect(),
    }
}

/// Simulates `n` Euler paths from `s0` on `[t0, T]`.
pub fn euler_path(spec: &JumpDiffusionSpec, cfg: &EulerConfig) -> Result<SampleMatrix> {
    cfg.validate()?;
    let scheme = Scheme::new(spec, cfg.times())?;
    let d = spec.dim();
    let k = scheme.steps();
    let width = if cfg.record_full { (k + 1) * d } else { d };
    let data = fill_rows(cfg.n, width, &cfg.stream, |rng, row| {
        let mut s = spec.s0.clone();
        let mut w = Scratch::new(d);
        if cfg.record_full {
            row[..d].copy_from_slice(&s);
        }
        for i in 0..k {
            scheme.step(rng, i, &mut s, &mut w);
            if cfg.record_full {
                row[(i + 1) * d..(i + 2) * d].copy_from_slice(&s);
            }
        }
        if !cfg.record_full {
            row.copy_from_slice(&s);
        }
    });
    scheme.check()?;
    Ok(SampleMatrix::new(width, data)?.with_provenance(cfg.stream.provenance(format!("euler/{}", spec.label))))
}

/// One Euler step of length `dt` at time `t` applied to every row of
/// `states`, with independent noise per row. Two calls with the same stream
/// share their noise row by row.
pub fn transition_apply(
    spec: &JumpDiffusionSpec,
    t: f64,
    dt: f64,
    states: &SampleMatrix,
    stream: &RngStream,
) -> Result<SampleMatrix> {
    if states.dim() != spec.dim() {
        return invalid(format!("states have dimension {}, spec {}", states.dim(), spec.dim()));
    }
    if !(dt >= 0.0 && dt.is_finite()) {
        return invalid(format!("step must be nonnegative, got {dt}"));
    }
    if dt == 0.0 {
        return Ok(states.clone());
    }
    let scheme = Scheme::new(spec, vec![t, t + dt])?;
    let d = spec.dim();
    let mut data = states.as_slice().to_vec();
    map_rows(&mut data, d, stream, |rng, row| {
        let mut w = Scratch::new(d);
        scheme.step(rng, 0, row, &mut w);
    });
    scheme.check()?;
    SampleMatrix::new(d, data)
}

/// A tensor grid of states, enumerated with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGrid {
    pub axes: Vec<Vec<f64>>,
}

impl StateGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
            return invalid("state grid needs at least one point on every axis");
        }
        if axes.iter().any(|a| a.windows(2).any(|w| !(w[0] < w[1]))) {
            return invalid("state grid axes must be strictly increasing");
        }
        Ok(Self { axes })
    }

    /// A one-dimensional grid.
    pub fn line(points: Vec<f64>) -> Result<Self> {
        Self::new(vec![points])
    }

    /// `n` equidistant points on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo < hi) {
            return invalid("uniform grid needs n >= 2 and lo < hi");
        }
        Self::line((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            out[k] = idx % axis.len();
            idx /= axis.len();
        }
        out
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.axes).fold(0, |acc, (i, a)| acc * a.len() + i)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().zip(&self.axes).map(|(i, a)| a[*i]).collect()
    }

    fn axis_uniform(&self, k: usize) -> bool {
        let a = &self.axes[k];
        if a.len() < 3 {
            return true;
        }
        let h = a[1] - a[0];
        a.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300))
    }
}

/// Nested Monte-Carlo estimate of `G(t, s) = E[g(S_T) | S_t = s]` on a
/// time-by-state grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagationEstimate {
    pub grid: StateGrid,
    pub times: Vec<f64>,
    pub t_end: f64,
    /// Euler steps on the full horizon `[t0, T]`.
    pub steps: usize,
    /// `values[time][state]`.
    pub values: Vec<Vec<f64>>,
    /// `stderr[time][state]`; zero at `t = T`.
    pub stderr: Vec<Vec<f64>>,
    /// Paths per cell for each time slice (zero at `t = T`).
    pub samples: Vec<usize>,
    /// Per-path payoffs `[time][state][path]`. Paths share random numbers
    /// across states within a time slice.
    #[serde(skip)]
    pub path_values: Vec<Vec<Vec<f64>>>,
}

impl PropagationEstimate {
    /// CSV with columns `t, s, value, stderr` (`s0, s1, ...` for `d > 1`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let d = self.grid.dim();
        let state_cols = if d == 1 { "s".to_string() } else { (0..d).map(|k| format!("s{k}")).collect::<Vec<_>>().join(",") };
        writeln!(w, "t,{state_cols},value,stderr")?;
        for (ti, t) in self.times.iter().enumerate() {
            for si in 0..self.grid.len() {
                let s = self.grid.point(si);
                let s: Vec<String> = s.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{t},{},{},{}", s.join(","), self.values[ti][si], self.stderr[ti][si])?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii CSV")
    }

    /// Value and standard error of `sum_k c_k G(t_i, s_k)`, using the shared
    /// noise across states when per-path values are available.
    pub fn combination(&self, ti: usize, terms: &[(usize, f64)]) -> (f64, f64) {
        let value = terms.iter().map(|(k, c)| c * self.values[ti][*k]).sum();
        let paths = &self.path_values[ti];
        if paths.is_empty() || paths[0].is_empty() {
            return (value, 0.0);
        }
        let n = paths[0].len();
        let combo: Vec<f64> = (0..n).map(|p| terms.iter().map(|(k, c)| c * paths[*k][p]).sum()).collect();
        (value, crate::stats::stderr(&combo))
    }
}

/// Estimates `G(t, s)` for every `t` in `times` and every grid state by
/// running `cfg.n` Euler paths from `(t, s)` to `cfg.t_end` on the Euler grid
/// of `cfg`. All states in one time slice share their random numbers.
pub fn estimate_propagation<G>(
    spec: &JumpDiffusionSpec,
    g: G,
    grid: &StateGrid,
    times: &[f64],
    cfg: &EulerConfig,
) -> Result<PropagationEstimate>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    if times.is_empty() || grid.is_empty() {
        return invalid("propagation estimate needs nonempty time and state grids");
    }
    if grid.dim() != spec.dim() {
        return invalid(format!("state grid has dimension {}, spec {}", grid.dim(), spec.dim()));
    }
    let full = cfg.times();
    let scheme = Scheme::new(spec, full.clone())?;
    let k_total = cfg.steps;
    let dt = cfg.dt();
    let d = spec.dim();
    let mut values = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    let mut samples = Vec::with_capacity(times.len());
    let mut path_values = Vec::with_capacity(times.len());
    for (ti, &t) in times.iter().enumerate() {
        let pos = (t - cfg.t0) / dt;
        let start = pos.round();
        if !(t >= cfg.t0 - 1e-12 && t <= cfg.t_end + 1e-12) || (pos - start).abs() > 1e-6 {
            return invalid(format!("time {t} is not on the Euler grid of [{}, {}] with {k_total} steps", cfg.t0, cfg.t_end));
        }
        let start = start as usize;
        if start >= k_total {
            let v: Vec<f64> = (0..grid.len()).map(|si| g(&grid.point(si))).collect();
            stderr.push(vec![0.0; v.len()]);
            values.push(v);
            samples.push(0);
            path_values.push(Vec::new());
            continue;
        }
        let stream = cfg.stream.substream(ti as u64);
        let per_state: Vec<Vec<f64>> = (0..grid.len())
            .into_par_iter()
            .map(|si| {
                let s0 = grid.point(si);
                fill_rows(cfg.n, 1, &stream, |rng, row| {
                    let mut s = s0.clone();
                    let mut w = Scratch::new(d);
                    for i in start..k_total {
                        scheme.step(rng, i, &mut s, &mut w);
                    }
                    row[0] = g(&s);
                })
            })
            .collect();
        values.push(per_state.iter().map(|v| crate::stats::mean(v)).collect());
        stderr.push(per_state.iter().map(|v| crate::stats::stderr(v)).collect());
        samples.push(cfg.n);
        path_values.push(per_state);
    }
    scheme.check()?;
    Ok(PropagationEstimate {
        grid: grid.clone(),
        times: times.to_vec(),
        t_end: cfg.t_end,
        steps: k_total,
        values,
        stderr,
        samples,
        path_values,
    })
}

/// Finite-difference membership result for one time slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceCheck {
    pub t: f64,
    pub checks: usize,
    pub violations: Vec<String>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub class: FunctionClass,
    pub slack_stderrs: f64,
    pub slices: Vec<SliceCheck>,
    pub verdict: Verdict,
}

impl PropagationReport {
    pub fn total_checks(&self) -> usize {
        self.slices.iter().map(|s| s.checks).sum()
    }

    pub fn total_violations(&self) -> usize {
        self.slices.iter().map(|s| s.violations.len()).sum()
    }

    /// Share of finite-difference checks that failed.
    pub fn violation_fraction(&self) -> f64 {
        let c = self.total_checks();
        if c == 0 {
            0.0
        } else {
            self.total_violations() as f64 / c as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Slack in standard errors for the finite-difference checks.
pub const PROPAGATION_SLACK: f64 = 3.0;

/// Tests whether each slice `G(t, .)` of the estimate is a member of `class`
/// by finite differences: monotonicity (adjacent differences), convexity
/// (divided second differences along axes, plus diagonals on uniform grids),
/// supermodularity (rectangle inequality). A check fails when the
/// combination is below `-3 stderr` (plus a rounding allowance).
pub fn check_propagation_of_order(est: &PropagationEstimate, class: FunctionClass) -> Result<PropagationReport> {
    let grid = &est.grid;
    if grid.axes.iter().any(|a| a.len() < 3) {
        return invalid("propagation-of-order checks need at least 3 grid points per axis");
    }
    let d = grid.dim();
    let mut combos: Vec<(String, Vec<(usize, f64)>)> = Vec::new();
    for idx in 0..grid.len() {
        let m = grid.multi_index(idx);
        for k in 0..d {
            let ax = &grid.axes[k];
            let i = m[k];
            let shifted = |di: isize| {
                let mut mm = m.clone();
                mm[k] = (i as isize + di) as usize;
                grid.index(&mm)
            };
            if class.is_increasing() && i + 1 < ax.len() {
                combos.push((format!("monotone axis {k} at {:?}", grid.point(idx)), vec![(shifted(1), 1.0), (idx, -1.0)]));
            }
            if class.is_axis_convex() && i >= 1 && i + 1 < ax.len() {
                let (hl, hr) = (ax[i] - ax[i - 1], ax[i + 1] - ax[i]);
                combos.push((
                    format!("convex axis {k} at {:?}", grid.point(idx)),
                    vec![(shifted(-1), 1.0 / hl), (idx, -1.0 / hl - 1.0 / hr), (shifted(1), 1.0 / hr)],
                ));
            }
        }
        for a in 0..d {
            for b in (a + 1)..d {
                let (ia, ib) = (m[a], m[b]);
                let at = |da: isize, db: isize| {
                    let mut mm = m.clone();
                    mm[a] = (ia as isize + da) as usize;
                    mm[b] = (ib as isize + db) as usize;
                    grid.index(&mm)
                };
                if class.is_supermodular() && ia + 1 < grid.axes[a].len() && ib + 1 < grid.axes[b].len() {
                    combos.push((
                        format!("supermodular axes ({a},{b}) at {:?}", grid.point(idx)),
                        vec![(at(1, 1), 1.0), (idx, 1.0), (at(1, 0), -1.0), (at(0, 1), -1.0)],
                    ));
                }
                let interior = ia >= 1 && ib >= 1 && ia + 1 < grid.axes[a].len() && ib + 1 < grid.axes[b].len();
                if class.is_convex() && interior && grid.axis_uniform(a) && grid.axis_uniform(b) {
                    combos.push((
                        format!("convex diagonal ({a},{b}) at {:?}", grid.point(idx)),
                        vec![(at(-1, -1), 1.0), (idx, -2.0), (at(1, 1), 1.0)],
                    ));
                    combos.push((
                        format!("convex antidiagonal ({a},{b}) at {:?}", grid.point(idx)),
                        vec![(at(-1, 1), 1.0), (idx, -2.0), (at(1, -1), 1.0)],
                    ));
                }
            }
        }
    }
    let slices: Vec<SliceCheck> = (0..est.times.len())
        .map(|ti| {
            let violations: Vec<String> = combos
                .iter()
                .filter_map(|(label, terms)| {
                    let (v, se) = est.combination(ti, terms);
                    let scale: f64 = terms.iter().map(|(k, c)| (c * est.values[ti][*k]).abs()).sum();
                    let slack = PROPAGATION_SLACK * se + 1e-12 * (1.0 + scale);
                    (v < -slack).then(|| format!("{label}: {v:.6e} (stderr {se:.3e})"))
                })
                .collect();
            let verdict = if violations.is_empty() { Verdict::Consistent } else { Verdict::Violation };
            SliceCheck { t: est.times[ti], checks: combos.len(), violations, verdict }
        })
        .collect();
    let verdict =
        if slices.iter().all(|s| s.verdict == Verdict::Consistent) { Verdict::Consistent } else { Verdict::Violation };
    Ok(PropagationReport { class, slack_stderrs: PROPAGATION_SLACK, slices, verdict })
}

/// Operational proxy for convergence of the Euler propagation operator:
/// estimates at `K` and `2K` steps with independent noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinementCheck {
    pub value_k: f64,
    pub stderr_k: f64,
    pub value_2k: f64,
    pub stderr_2k: f64,
    /// True when the two values agree within 3 joint standard errors.
    pub stable: bool,
}

pub fn refinement_check<G>(spec: &JumpDiffusionSpec, g: G, cfg: &EulerConfig) -> Result<RefinementCheck>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let coarse = EulerConfig { record_full: false, stream: cfg.stream.substream(1), ..*cfg };
    let fine = EulerConfig { steps: 2 * cfg.steps, stream: cfg.stream.substream(2), ..coarse };
    let eval = |c: &EulerConfig| -> Result<(f64, f64)> {
        let paths = euler_path(spec, c)?;
        let v: Vec<f64> = paths.iter_rows().map(&g).collect();
        Ok((crate::stats::mean(&v), crate::stats::stderr(&v)))
    };
    let (value_k, stderr_k) = eval(&coarse)?;
    let (value_2k, stderr_2k) = eval(&fine)?;
    let joint = (stderr_k * stderr_k + stderr_2k * stderr_2k).sqrt();
    Ok(RefinementCheck { value_k, stderr_k, value_2k, stderr_2k, stable: (value_k - value_2k).abs() <= 3.0 * joint })
}

/// A function `G(t, s)` that can be evaluated at arbitrary points.
pub trait Field: Sync {
    fn value(&self, t: f64, s: &[f64]) -> f64;
}

impl<F> Field for F
where
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    fn value(&self, t: f64, s: &[f64]) -> f64 {
        self(t, s)
    }
}

/// `G` tabulated on `times x grid`, multilinearly interpolated; NaN outside
/// the table.
#[derive(Debug, Clone)]
pub struct TabulatedField {
    times: Vec<f64>,
    grid: StateGrid,
    /// `values[time * grid.len() + state]`.
    values: Vec<f64>,
}

impl TabulatedField {
    pub fn new(times: Vec<f64>, grid: StateGrid, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("table times must be nonempty and strictly increasing");
        }
        if values.len() != times.len() * grid.len() {
            return invalid(format!("table needs {} values, got {}", times.len() * grid.len(), values.len()));
        }
        Ok(Self { times, grid, values })
    }

    pub fn from_fn<F: Fn(f64, &[f64]) -> f64>(times: Vec<f64>, grid: StateGrid, f: F) -> Result<Self> {
        let values = times.iter().flat_map(|&t| (0..grid.len()).map(|k| f(t, &grid.point(k))).collect::<Vec<_>>()).collect();
        Self::new(times, grid, values)
    }
}

/// Bracketing index and weight of `x` on `axis`; `None` outside.
fn bracket(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if n == 1 {
        return (x == axis[0]).then_some((0, 0.0));
    }
    let tol = 1e-12 * (axis[n - 1] - axis[0]);
    if x < axis[0] - tol || x > axis[n - 1] + tol {
        return None;
    }
    let j = axis.partition_point(|v| *v <= x).clamp(1, n - 1) - 1;
    let w = ((x - axis[j]) / (axis[j + 1] - axis[j])).clamp(0.0, 1.0);
    Some((j, w))
}

impl Field for TabulatedField {
    fn value(&self, t: f64, s: &[f64]) -> f64 {
        let mut axes: Vec<&[f64]> = vec![&self.times];
        axes.extend(self.grid.axes.iter().map(|a| a.as_slice()));
        let mut coords = vec![t];
        coords.extend_from_slice(s);
        let mut br = Vec::with_capacity(axes.len());
        for (a, x) in axes.iter().zip(&coords) {
            match bracket(a, *x) {
                Some(b) => br.push(b),
                None => return f64::NAN,
            }
        }
        let m = self.grid.len();
        let mut total = 0.0;
        for corner in 0..(1usize << br.len()) {
            let mut weight = 1.0;
            let mut idx = Vec::with_capacity(br.len());
            for (k, (j, w)) in br.iter().enumerate() {
                let up = (corner >> k) & 1 == 1;
                let len = axes[k].len();
                if up {
                    weight *= w;
                    idx.push((j + 1).min(len - 1));
                } else {
                    weight *= 1.0 - w;
                    idx.push(*j);
                }
            }
            if weight == 0.0 {
                continue;
            }
            let state = self.grid.index(&idx[1..]);
            total += weight * self.values[idx[0] * m + state];
        }
        total
    }
}

/// Left side of the Kolmogorov backward equation at `(t, s)`:
/// `D_t G + sum_i b_i D_i G + 1/2 sum_ij c_ij D_ij G
///  + int (G(t, s + phi) - G(t, s) - grad G . phi) lambda(dy)`,
/// with central differences of step `h` in time and space.
pub fn backward_residual(spec: &JumpDiffusionSpec, field: &dyn Field, t: f64, s: &[f64], h: f64) -> Result<f64> {
    let d = spec.dim();
    if s.len() != d {
        return invalid(format!("point has dimension {}, spec {d}", s.len()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return invalid(format!("step h must be positive, got {h}"));
    }
    let near_boundary = || Error::InvalidArgument(format!("point (t = {t}, s = {s:?}) is too close to the grid boundary for step {h}"));
    let eval = |tt: f64, ss: &[f64]| -> Result<f64> {
        let v = field.value(tt, ss);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(near_boundary())
        }
    };
    let shifted = |moves: &[(usize, f64)]| {
        let mut x = s.to_vec();
        for (k, delta) in moves {
            x[*k] += delta;
        }
        x
    };
    let g0 = eval(t, s)?;
    let dt = (eval(t + h, s)? - eval(t - h, s)?) / (2.0 * h);
    let mut grad = vec![0.0; d];
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        let gp = eval(t, &shifted(&[(i, h)]))?;
        let gm = eval(t, &shifted(&[(i, -h)]))?;
        grad[i] = (gp - gm) / (2.0 * h);
        hess[(i, i)] = (gp - 2.0 * g0 + gm) / (h * h);
        for j in 0..i {
            let pp = eval(t, &shifted(&[(i, h), (j, h)]))?;
            let pm = eval(t, &shifted(&[(i, h), (j, -h)]))?;
            let mp = eval(t, &shifted(&[(i, -h), (j, h)]))?;
            let mm = eval(t, &shifted(&[(i, -h), (j, -h)]))?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let b = spec.drift_at(t, s);
    let c = spec.covariance_at(t, s);
    let mut total = dt;
    for i in 0..d {
        total += b[i] * grad[i];
        for j in 0..d {
            total += 0.5 * c[(i, j)] * hess[(i, j)];
        }
    }
    if let Some(j) = &spec.jumps {
        let failed = AtomicBool::new(false);
        let integrand = |y: f64| {
            let mut jump = vec![0.0; d];
            spec.jump_at(t, s, y, &mut jump);
            let target: Vec<f64> = s.iter().zip(&jump).map(|(a, b)| a + b).collect();
            let v = field.value(t, &target);
            if !v.is_finite() {
                failed.store(true, Ordering::Relaxed);
                return 0.0;
            }
            v - g0 - grad.iter().zip(&jump).map(|(g, y)| g * y).sum::<f64>()
        };
        total += j.intensity.integral(integrand)?;
        if failed.load(Ordering::Relaxed) {
            return Err(near_boundary());
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orders::DiscreteMeasure;
    use crate::stats;

    fn point_mass(y: f64, mass: f64) -> IntensityMeasure {
        IntensityMeasure::Atomic(DiscreteMeasure::from_1d(&[(y, mass)]).unwrap())
    }

    fn identity_shape() -> JumpShape {
        Arc::new(|_, y, out| out[0] = y)
    }

    #[test]
    fn trivial_paths() {
        let zero = JumpDiffusionSpec::scalar(1.5, |_, _| 0.0, |_, _| 0.0);
        let cfg = EulerConfig::new(0.0, 1.0, 10, 100, RngStream::new(1, 0));
        let p = euler_path(&zero, &cfg).unwrap();
        assert!(p.as_slice().iter().all(|v| *v == 1.5));

        let drift = JumpDiffusionSpec::scalar(0.5, |_, _| 1.0, |_, _| 0.0);
        for k in [1, 7, 64] {
            let cfg = EulerConfig::new(0.25, 2.0, k, 10, RngStream::new(1, 1));
            let p = euler_path(&drift, &cfg).unwrap();
            assert!(p.as_slice().iter().all(|v| (v - 2.25).abs() < 1e-12));
        }
    }

    #[test]
    fn compensated_jumps_have_zero_mean() {
        let one: ScalarField = Arc::new(|_, _| 1.0);
        let spec = JumpDiffusionSpec::scalar(0.0, |_, _| 0.0, |_, _| 0.0)
            .with_jumps(JumpLink::Factored { phi: one, psi: identity_shape() }, point_mass(0.7, 2.0))
            .unwrap();
        let cfg = EulerConfig::new(0.0, 1.0, 16, 200_000, RngStream::new(2, 0));
        let p = euler_path(&spec, &cfg).unwrap();
        let x = p.as_slice();
        assert!(stats::mean(x).abs() < 4.0 * stats::stderr(x));

        let too_coarse = EulerConfig::new(0.0, 1.0, 2, 10, RngStream::new(2, 0));
        assert!(matches!(euler_path(&spec, &too_coarse), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn density_intensity_compensator() {
        let dens = LevyDensity::new("exp", 0.0, f64::INFINITY, |y| 3.0 * (-y).exp()).unwrap();
        let lam = IntensityMeasure::Density(dens);
        assert!((lam.mass().unwrap() - 3.0).abs() < 1e-9);
        assert!((lam.expectation(|y| y).unwrap() - 1.0).abs() < 1e-8);
        let spec = JumpDiffusionSpec::levy(vec![0.0], vec![0.0], DMatrix::zeros(1, 1))
            .unwrap()
            .with_additive_jumps(identity_shape(), lam)
            .unwrap();
        assert!(spec.is_spatially_homogeneous());
        let cfg = EulerConfig::new(0.0, 1.0, 32, 200_000, RngStream::new(3, 0));
        let p = euler_path(&spec, &cfg).unwrap();
        let x = p.as_slice();
        assert!(stats::mean(x).abs() < 4.0 * stats::stderr(x));
    }

    #[test]
    fn weak_consistency_of_brownian_second_moment() {
        let spec = JumpDiffusionSpec::scalar(0.5, |_, _| 0.0, |_, _| 1.0);
        for k in [8, 32, 128] {
            let cfg = EulerConfig::new(0.0, 1.0, k, 100_000, RngStream::new(4, k as u64));
            let p = euler_path(&spec, &cfg).unwrap();
            let sq: Vec<f64> = p.as_slice().iter().map(|v| v * v).collect();
            assert!((stats::mean(&sq) - 1.25).abs() < 4.0 * stats::stderr(&sq), "K = {k}");
        }
    }

    #[test]
    fn negative_factor_is_rejected() {
        let phi: ScalarField = Arc::new(|_, s| s[0]);
        let spec = JumpDiffusionSpec::scalar(-1.0, |_, _| 0.0, |_, _| 0.0)
            .with_jumps(JumpLink::Factored { phi, psi: identity_shape() }, point_mass(1.0, 1.0))
            .unwrap();
        let cfg = EulerConfig::new(0.0, 1.0, 4, 10, RngStream::new(5, 0));
        assert!(euler_path(&spec, &cfg).is_err());
    }

    #[test]
    fn transition_examples() {
        let states = SampleMatrix::from_scalars(vec![-1.0, 0.0, 2.0]);
        let spec = JumpDiffusionSpec::scalar(0.0, |_, s| 0.3 * s, |_, _| 0.0);
        let same = transition_apply(&spec, 0.0, 0.0, &states, &RngStream::new(6, 0)).unwrap();
        assert_eq!(same.as_slice(), states.as_slice());
        let out = transition_apply(&spec, 0.0, 0.1, &states, &RngStream::new(6, 0)).unwrap();
        for (a, b) in out.as_slice().iter().zip(states.as_slice()) {
            assert!((a - b * 1.03).abs() < 1e-14);
        }
    }

    #[test]
    fn transition_preserves_icx_under_common_noise() {
        let phi: ScalarField = Arc::new(|_, s| 0.2 * s[0].max(0.0) + 0.1);
        let spec = JumpDiffusionSpec::scalar(0.0, |_, s| 0.1 * s + 0.05 * s.max(0.0), |_, s| 0.3 * s.max(0.0) + 0.1)
            .with_jumps(JumpLink::Factored { phi, psi: identity_shape() }, point_mass(1.0, 2.0))
            .unwrap();
        let n = 10_000;
        let low = SampleMatrix::from_scalars(vec![0.2; n]);
        let high = SampleMatrix::from_scalars(vec![0.5; n]);
        let stream = RngStream::new(7, 0);
        let a = transition_apply(&spec, 0.0, 0.2, &low, &stream).unwrap();
        let b = transition_apply(&spec, 0.0, 0.2, &high, &stream).unwrap();
        for k in [-1.0, 0.0, 0.3, 0.6, 1.0, 1.5] {
            let diff: Vec<f64> =
                a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (y - k).max(0.0) - (x - k).max(0.0)).collect();
            assert!(stats::mean(&diff) >= -3.0 * stats::stderr(&diff), "hinge at {k}");
        }
    }

    #[test]
    fn propagation_terminal_slice_and_linear_g() {
        let spec = JumpDiffusionSpec::levy(vec![0.0], vec![0.4], DMatrix::from_element(1, 1, 0.5)).unwrap();
        let grid = StateGrid::uniform(-1.0, 1.0, 5).unwrap();
        let cfg = EulerConfig::new(0.0, 1.0, 8, 20_000, RngStream::new(8, 0));
        let est = estimate_propagation(&spec, |s| 2.0 * s[0], &grid, &[0.0, 0.5, 1.0], &cfg).unwrap();
        for (k, s) in grid.axes[0].iter().enumerate() {
            assert_eq!(est.values[2][k], 2.0 * s);
            assert_eq!(est.stderr[2][k], 0.0);
            let expect = 2.0 * (s + 0.4);
            assert!((est.values[0][k] - expect).abs() < 4.0 * est.stderr[0][k]);
        }
        // Spatial homogeneity: increments in s are constant for linear g.
        for ti in 0..2 {
            for k in 0..3 {
                let (v, se) = est.combination(ti, &[(k + 2, 1.0), (k + 1, -2.0), (k, 1.0)]);
                assert!(v.abs() <= 3.0 * se + 1e-12);
            }
        }
        assert!(est.to_csv_string().starts_with("t,s,value,stderr\n"));
        let off_grid = estimate_propagation(&spec, |s| s[0], &grid, &[0.3], &cfg);
        assert!(off_grid.is_err());
    }

    #[test]
    fn propagation_checks() {
        let spec = JumpDiffusionSpec::levy(vec![0.0], vec![0.1], DMatrix::from_element(1, 1, 0.3))
            .unwrap()
            .with_additive_jumps(identity_shape(), point_mass(-0.5, 1.0))
            .unwrap();
        let grid = StateGrid::uniform(-1.0, 1.0, 9).unwrap();
        let cfg = EulerConfig::new(0.0, 1.0, 16, 5_000, RngStream::new(9, 0));
        let times = [0.0, 0.5, 1.0];
        let constant = estimate_propagation(&spec, |_| 3.0, &grid, &times, &cfg).unwrap();
        for class in FunctionClass::ALL {
            assert_eq!(check_propagation_of_order(&constant, class).unwrap().verdict, Verdict::Consistent);
        }
        let hinge = estimate_propagation(&spec, |s| s[0].max(0.0), &grid, &times, &cfg).unwrap();
        let rep = check_propagation_of_order(&hinge, FunctionClass::Icx).unwrap();
        assert_eq!(rep.verdict, Verdict::Consistent, "{rep:?}");
        let concave = estimate_propagation(&spec, |s| -(s[0] * s[0]), &grid, &times, &cfg).unwrap();
        let rep = check_propagation_of_order(&concave, FunctionClass::Cx).unwrap();
        assert_eq!(rep.slices[2].verdict, Verdict::Violation);

        let small = StateGrid::uniform(0.0, 1.0, 2).unwrap();
        let est = estimate_propagation(&spec, |_| 1.0, &small, &[1.0], &cfg).unwrap();
        assert!(check_propagation_of_order(&est, FunctionClass::St).is_err());
    }

    #[test]
    fn propagation_two_dimensional_supermodular() {
        let spec = JumpDiffusionSpec::levy(vec![0.0, 0.0], vec![0.0, 0.0], DMatrix::identity(2, 2) * 0.3).unwrap();
        let grid = StateGrid::new(vec![vec![-1.0, 0.0, 1.0], vec![-1.0, 0.0, 1.0]]).unwrap();
        let cfg = EulerConfig::new(0.0, 1.0, 4, 4_000, RngStream::new(10, 0));
        let est = estimate_propagation(&spec, |s| (s[0] + s[1]).max(0.0), &grid, &[0.0, 1.0], &cfg).unwrap();
        for class in [FunctionClass::Icx, FunctionClass::Idcx, FunctionClass::Ism] {
            assert_eq!(check_propagation_of_order(&est, class).unwrap().verdict, Verdict::Consistent);
        }
        let anti = estimate_propagation(&spec, |s| (s[0] - s[1]).max(0.0), &grid, &[1.0], &cfg).unwrap();
        assert_eq!(check_propagation_of_order(&anti, FunctionClass::Sm).unwrap().verdict, Verdict::Violation);
    }

    #[test]
    fn refinement_is_stable_for_brownian_motion() {
        let spec = JumpDiffusionSpec::scalar(0.0, |_, _| 0.0, |_, _| 1.0);
        let cfg = EulerConfig::new(0.0, 1.0, 8, 50_000, RngStream::new(11, 0));
        let r = refinement_check(&spec, |s| s[0].max(0.0), &cfg).unwrap();
        assert!(r.stable, "{r:?}");
    }

    #[test]
    fn residual_examples() {
        let t_end = 1.0;
        let drift = JumpDiffusionSpec::scalar(0.0, |_, _| 0.7, |_, _| 0.0);
        let lin = move |t: f64, s: &[f64]| 2.0 * (s[0] + 0.7 * (t_end - t));
        assert!(backward_residual(&drift, &lin, 0.3, &[0.2], 0.01).unwrap().abs() < 1e-12);

        let bm = JumpDiffusionSpec::scalar(0.0, |_, _| 0.0, |_, _| 1.0);
        let sq = move |t: f64, s: &[f64]| s[0] * s[0] + (t_end - t);
        assert!(backward_residual(&bm, &sq, 0.5, &[0.3], 1.0 / 64.0).unwrap().abs() < 1e-9);
        let quartic = move |t: f64, s: &[f64]| {
            let tau = t_end - t;
            s[0].powi(4) + 6.0 * s[0] * s[0] * tau + 3.0 * tau * tau
        };
        let r1 = backward_residual(&bm, &quartic, 0.5, &[0.3], 0.1).unwrap();
        let r2 = backward_residual(&bm, &quartic, 0.5, &[0.3], 0.05).unwrap();
        assert!((r1 - 0.01).abs() < 1e-9 && (r1 / r2 - 4.0).abs() < 1e-4, "{r1} {r2}");

        // Compound Poisson with exponential payoff: G = exp(s + kappa (T - t)).
        let lam = 1.5;
        let jumps = DiscreteMeasure::from_1d(&[(-0.4, 0.5 * lam), (0.6, 0.5 * lam)]).unwrap();
        let mgf: f64 = 0.5 * ((-0.4f64).exp() + 0.6f64.exp());
        let mean = 0.1;
        let b = 0.2;
        let kappa = b + lam * (mgf - 1.0 - mean);
        let cp = JumpDiffusionSpec::levy(vec![0.0], vec![b], DMatrix::zeros(1, 1))
            .unwrap()
            .with_additive_jumps(identity_shape(), IntensityMeasure::Atomic(jumps))
            .unwrap();
        let g = move |t: f64, s: &[f64]| (s[0] + kappa * (t_end - t)).exp();
        let r1 = backward_residual(&cp, &g, 0.5, &[0.1], 0.02).unwrap();
        let r2 = backward_residual(&cp, &g, 0.5, &[0.1], 0.01).unwrap();
        assert!((r1 / r2 - 4.0).abs() < 0.1, "{r1} {r2}");
    }

    #[test]
    fn tabulated_field_matches_nodes_and_rejects_boundary() {
        let times: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let grid = StateGrid::uniform(-1.0, 1.0, 33).unwrap();
        let f = |t: f64, s: &[f64]| s[0] * s[0] + (1.0 - t);
        let tab = TabulatedField::from_fn(times, grid, f).unwrap();
        assert!((tab.value(0.25, &[0.125]) - f(0.25, &[0.125])).abs() < 1e-14);
        let bm = JumpDiffusionSpec::scalar(0.0, |_, _| 0.0, |_, _| 1.0);
        assert!(backward_residual(&bm, &tab, 0.5, &[0.0], 0.125).unwrap().abs() < 1e-12);
        assert!(matches!(backward_residual(&bm, &tab, 0.0, &[0.0], 0.125), Err(Error::InvalidArgument(_))));
        assert!(matches!(backward_residual(&bm, &tab, 0.5, &[1.0], 0.0625), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn sum_factored_requires_one_dimension() {
        let phi: ScalarField = Arc::new(|_, _| 1.0);
        let psi: ScalarShape = Arc::new(|_, y| y.max(0.0));
        let two = JumpDiffusionSpec::levy(vec![0.0, 0.0], vec![0.0, 0.0], DMatrix::zeros(2, 2)).unwrap();
        let link = JumpLink::SumFactored { terms: vec![(phi, psi)] };
        assert!(two.with_jumps(link.clone(), point_mass(1.0, 1.0)).is_err());
        let one = JumpDiffusionSpec::scalar(0.0, |_, _| 0.0, |_, _| 0.0).with_jumps(link, point_mass(1.0, 1.0)).unwrap();
        let cfg = EulerConfig::new(0.0, 1.0, 8, 100_000, RngStream::new(12, 0));
        let p = euler_path(&one, &cfg).unwrap();
        assert!(stats::mean(p.as_slice()).abs() < 4.0 * stats::stderr(p.as_slice()));
        let k = one.jump_kernel_atomic(0.0, &[0.0]).unwrap().unwrap();
        assert_eq!(k.atoms()[0].point, vec![1.0]);
    }
}
