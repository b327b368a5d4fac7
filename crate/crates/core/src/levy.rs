//! Lévy measures, truncation to finite activity, mass matching with an atom
//! at zero, truncation-level root finding and the NIG Lévy density.

use crate::error::{invalid, Error, Result};
use crate::orders::{Atom, DiscreteMeasure, DistributionFunction};
use crate::quadrature::{integrate, integrate_upper_tail};
use crate::special::bessel_k1_scaled;
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Relative tolerance handed to the quadrature for masses and moments.
const QUAD_REL: f64 = 1e-12;

/// A one-dimensional Lévy density `f` supported on `[lower, upper]`
/// (endpoints may be infinite).
#[derive(Clone)]
pub struct LevyDensity {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lower: f64,
    pub upper: f64,
    pub label: String,
}

impl fmt::Debug for LevyDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyDensity")
            .field("label", &self.label)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

impl LevyDensity {
    pub fn new<F>(label: impl Into<String>, lower: f64, upper: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lower < upper) {
            return invalid(format!("density support [{lower}, {upper}] is empty"));
        }
        Ok(Self { f: Arc::new(f), lower, upper, label: label.into() })
    }

    /// Density value; zero outside the support and at the origin.
    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 || x < self.lower || x > self.upper {
            0.0
        } else {
            (self.f)(x)
        }
    }
}

#[derive(Debug, Clone)]
pub enum MeasureForm {
    Density(LevyDensity),
    Atomic(DiscreteMeasure),
}

/// A Lévy measure. Whether the total mass is infinite is declared by the
/// caller rather than detected numerically.
#[derive(Debug, Clone)]
pub struct LevyMeasure {
    pub form: MeasureForm,
    pub declared_infinite_mass: bool,
}

impl LevyMeasure {
    pub fn from_density(density: LevyDensity, declared_infinite_mass: bool) -> Self {
        Self { form: MeasureForm::Density(density), declared_infinite_mass }
    }

    /// Atomic measure; an atom at the origin is rejected.
    pub fn atomic(m: DiscreteMeasure) -> Result<Self> {
        if m.atoms().iter().any(|a| a.point.iter().all(|x| *x == 0.0)) {
            return invalid("a Lévy measure has no atom at the origin");
        }
        Ok(Self { form: MeasureForm::Atomic(m), declared_infinite_mass: false })
    }

    /// NIG Lévy measure with parameters `(alpha, beta, delta)`.
    pub fn nig(alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        nig_levy_density(1.0, alpha, beta, delta)?;
        let d = LevyDensity::new(
            format!("nig(alpha={alpha}, beta={beta}, delta={delta})"),
            f64::NEG_INFINITY,
            f64::INFINITY,
            move |x| nig_levy_density(x, alpha, beta, delta).unwrap_or(0.0),
        )?;
        Ok(Self::from_density(d, true))
    }

    /// Tempered stable measure with density `c_neg |x|^(-1-a) e^(-l_neg |x|)`
    /// on the negative and `c_pos x^(-1-a) e^(-l_pos x)` on the positive
    /// half-line. For `0 < a < 1` the paths have finite variation.
    pub fn tempered_stable(c_neg: f64, c_pos: f64, a: f64, l_neg: f64, l_pos: f64) -> Result<Self> {
        if !(c_neg >= 0.0 && c_pos >= 0.0 && c_neg + c_pos > 0.0) {
            return invalid(format!("tempered stable weights must be nonnegative and not both zero ({c_neg}, {c_pos})"));
        }
        if !(a > 0.0 && a < 2.0) {
            return invalid(format!("tempered stable index must lie in (0, 2), got {a}"));
        }
        if !(l_neg > 0.0 && l_pos > 0.0) {
            return invalid(format!("tempering rates must be positive ({l_neg}, {l_pos})"));
        }
        let lower = if c_neg > 0.0 { f64::NEG_INFINITY } else { 0.0 };
        let upper = if c_pos > 0.0 { f64::INFINITY } else { 0.0 };
        let d = LevyDensity::new(
            format!("tempered_stable(c_neg={c_neg}, c_pos={c_pos}, a={a}, l_neg={l_neg}, l_pos={l_pos})"),
            lower,
            upper,
            move |x| {
                let (c, l) = if x < 0.0 { (c_neg, l_neg) } else { (c_pos, l_pos) };
                let y = x.abs();
                c * y.powf(-1.0 - a) * (-l * y).exp()
            },
        )?;
        Ok(Self::from_density(d, true))
    }

    /// A finite measure with density `mass / (upper - lower)` on `[lower, upper]`.
    pub fn uniform(lower: f64, upper: f64, mass: f64) -> Result<Self> {
        if !(lower < upper && lower.is_finite() && upper.is_finite()) {
            return invalid(format!("uniform support [{lower}, {upper}] must be a bounded interval"));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return invalid(format!("mass must be positive and finite, got {mass}"));
        }
        let h = mass / (upper - lower);
        let d = LevyDensity::new(format!("uniform(lower={lower}, upper={upper}, mass={mass})"), lower, upper, move |_| h)?;
        Ok(Self::from_density(d, false))
    }

    /// The zero measure on `R^dim`.
    pub fn zero(dim: usize) -> Result<Self> {
        Self::atomic(DiscreteMeasure::new(dim, Vec::new())?)
    }

    pub fn dim(&self) -> usize {
        match &self.form {
            MeasureForm::Density(_) => 1,
            MeasureForm::Atomic(m) => m.dim(),
        }
    }

    /// `int min(|x|^2, 1) F(dx)`; errors if the quadrature does not converge.
    pub fn integrability(&self) -> Result<f64> {
        match &self.form {
            MeasureForm::Atomic(m) => Ok(m.integrate(|x| x.iter().map(|v| v * v).sum::<f64>().min(1.0))),
            MeasureForm::Density(d) => {
                let g = |x: f64| (x * x).min(1.0) * d.eval(x);
                let near = integrate(&g, -1.0, 1.0, QUAD_REL)?.value;
                let right = integrate_upper_tail(&g, 1.0, QUAD_REL)?.value;
                let left = integrate_upper_tail(|y| g(-y), 1.0, QUAD_REL)?.value;
                Ok(near + right + left)
            }
        }
    }
}

/// `(b, Sigma, F)` with the identity truncation convention for `b`.
#[derive(Debug, Clone)]
pub struct LevyTriplet {
    pub drift: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub measure: LevyMeasure,
}

impl LevyTriplet {
    pub fn new(drift: Vec<f64>, sigma: DMatrix<f64>, measure: LevyMeasure) -> Result<Self> {
        let d = drift.len();
        if d == 0 || sigma.nrows() != d || sigma.ncols() != d || measure.dim() != d {
            return invalid(format!(
                "triplet dimensions disagree: drift {d}, Sigma {}x{}, measure {}",
                sigma.nrows(),
                sigma.ncols(),
                measure.dim()
            ));
        }
        check_psd(&sigma, 1e-12, -1e-10)?;
        Ok(Self { drift, sigma, measure })
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }
}

/// Checks symmetry (absolute `sym_tol`) and that all eigenvalues are at least
/// `min_eig`. Returns the eigenvalues.
pub fn check_psd(m: &DMatrix<f64>, sym_tol: f64, min_eig: f64) -> Result<Vec<f64>> {
    if !m.is_square() {
        return invalid("matrix must be square");
    }
    if m.iter().any(|v| !v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let asym = (m - m.transpose()).amax();
    if asym > sym_tol {
        return invalid(format!("matrix is not symmetric (max asymmetry {asym:e})"));
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < min_eig {
        return invalid(format!("matrix is not positive semidefinite (eigenvalue {min:e})"));
    }
    Ok(eig.iter().copied().collect())
}

/// A Lévy measure restricted to the complement of `(eps_low, eps_up)`,
/// optionally with an added atom at the origin.
///
/// For atomic measures in several dimensions an atom survives when at least
/// one coordinate lies outside the window.
#[derive(Debug, Clone)]
pub struct TruncatedLevyMeasure {
    pub parent: LevyMeasure,
    pub eps_low: f64,
    pub eps_up: f64,
    pub zero_atom_weight: f64,
    /// Mass outside the window, excluding the zero atom.
    pub truncated_mass: f64,
}

impl TruncatedLevyMeasure {
    /// Total mass including the zero atom.
    pub fn mass(&self) -> f64 {
        self.truncated_mass + self.zero_atom_weight
    }

    pub fn dim(&self) -> usize {
        self.parent.dim()
    }

    fn keeps(&self, x: &[f64]) -> bool {
        x.iter().any(|v| *v <= self.eps_low || *v >= self.eps_up)
    }

    /// The surviving atoms (atomic parents only), without the zero atom.
    pub fn surviving_atoms(&self) -> Option<Vec<Atom>> {
        match &self.parent.form {
            MeasureForm::Atomic(m) => Some(m.atoms().iter().filter(|a| self.keeps(&a.point)).cloned().collect()),
            MeasureForm::Density(_) => None,
        }
    }

    /// `int g dFn` for a one-dimensional `g` over the surviving part.
    pub fn integrate_1d<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        let zero = self.zero_atom_weight * g(0.0);
        match &self.parent.form {
            MeasureForm::Atomic(m) => {
                if m.dim() != 1 {
                    return invalid("integrate_1d needs a one-dimensional measure");
                }
                Ok(m.atoms()
                    .iter()
                    .filter(|a| self.keeps(&a.point))
                    .map(|a| a.weight * g(a.point[0]))
                    .sum::<f64>()
                    + zero)
            }
            MeasureForm::Density(d) => {
                let h = |x: f64| g(x) * d.eval(x);
                Ok(density_integral(&h, d, f64::NEG_INFINITY, self.eps_low)?
                    + density_integral(&h, d, self.eps_up, f64::INFINITY)?
                    + zero)
            }
        }
    }

    /// `int |x|^k dFn` in one dimension (zero atom contributes only for k = 0).
    pub fn abs_moment(&self, k: i32) -> Result<f64> {
        self.integrate_1d(|x| if k == 0 { 1.0 } else { x.abs().powi(k) })
    }

    /// Measure of `[a, b]` (one-dimensional), zero atom included.
    pub fn mass_between(&self, a: f64, b: f64) -> Result<f64> {
        if !(a <= b) {
            return Ok(0.0);
        }
        let zero = if a <= 0.0 && 0.0 <= b { self.zero_atom_weight } else { 0.0 };
        match &self.parent.form {
            MeasureForm::Atomic(m) => Ok(m
                .atoms()
                .iter()
                .filter(|at| self.keeps(&at.point) && at.point[0] >= a && at.point[0] <= b)
                .map(|at| at.weight)
                .sum::<f64>()
                + zero),
            MeasureForm::Density(d) => {
                let f = |x: f64| d.eval(x);
                let neg = density_integral(&f, d, a, b.min(self.eps_low))?;
                let pos = density_integral(&f, d, a.max(self.eps_up), b)?;
                Ok(neg + pos + zero)
            }
        }
    }

    /// Atomic form of a truncated atomic measure (zero atom included).
    pub fn to_discrete(&self) -> Option<DiscreteMeasure> {
        let mut atoms = self.surviving_atoms()?;
        if self.zero_atom_weight > 0.0 {
            atoms.push(Atom { point: vec![0.0; self.dim()], weight: self.zero_atom_weight });
        }
        DiscreteMeasure::new(self.dim(), atoms).ok()
    }
}

/// `int_a^b h` restricted to the density support, where `[a, b]` lies on one
/// side of the origin (or is empty). The range is split dyadically towards
/// the origin so the pole at a truncation boundary is resolved.
fn density_integral<H: Fn(f64) -> f64>(h: &H, d: &LevyDensity, a: f64, b: f64) -> Result<f64> {
    let (a, b) = (a.max(d.lower), b.min(d.upper));
    if !(a < b) {
        return Ok(0.0);
    }
    if a < 0.0 && b > 0.0 {
        return Ok(density_integral(h, d, a, 0.0)? + density_integral(h, d, 0.0, b)?);
    }
    if b <= 0.0 {
        return side_integral(&|y: f64| h(-y), -b, -a);
    }
    side_integral(h, a, b)
}

/// `int_lo^hi g` for `0 <= lo < hi <= inf`.
fn side_integral<G: Fn(f64) -> f64>(g: &G, lo: f64, hi: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut x = lo;
    if x == 0.0 {
        // Only reachable for integrable densities on a closed window; the
        // quadrature never evaluates the endpoint itself.
        let stop = hi.min(1.0);
        total += integrate(g, 0.0, stop, QUAD_REL)?.value;
        x = stop;
    }
    while x < hi.min(1.0) {
        let next = (2.0 * x).min(hi).min(1.0);
        total += integrate(g, x, next, QUAD_REL)?.value;
        x = next;
    }
    if x < hi {
        total += if hi.is_finite() {
            integrate(g, x, hi, QUAD_REL)?.value
        } else {
            integrate_upper_tail(g, x, QUAD_REL)?.value
        };
    }
    Ok(total)
}

/// Restricts `F` to the complement of `(eps_low, eps_up)`.
pub fn truncate(f: &LevyMeasure, eps_low: f64, eps_up: f64) -> Result<TruncatedLevyMeasure> {
    if !(eps_low < 0.0 && eps_up > 0.0) {
        return invalid(format!("need eps_low < 0 < eps_up, got ({eps_low}, {eps_up})"));
    }
    let mut t = TruncatedLevyMeasure {
        parent: f.clone(),
        eps_low,
        eps_up,
        zero_atom_weight: 0.0,
        truncated_mass: 0.0,
    };
    t.truncated_mass = match &f.form {
        MeasureForm::Atomic(_) => t.surviving_atoms().expect("atomic").iter().map(|a| a.weight).sum(),
        MeasureForm::Density(_) => t
            .integrate_1d(|_| 1.0)
            .map_err(|e| e.with_context(&format!("truncating at ({eps_low}, {eps_up})")))?,
    };
    Ok(t)
}

/// Gives the lighter of two truncated measures an atom at the origin so the
/// total masses agree. The heavier measure is returned unchanged.
pub fn modify_pair(
    f1: &TruncatedLevyMeasure,
    f2: &TruncatedLevyMeasure,
) -> (TruncatedLevyMeasure, TruncatedLevyMeasure) {
    let (mut a, mut b) = (f1.clone(), f2.clone());
    let (m1, m2) = (a.mass(), b.mass());
    if m1 < m2 {
        a.zero_atom_weight += m2 - m1;
    } else if m2 < m1 {
        b.zero_atom_weight += m1 - m2;
    }
    (a, b)
}

/// `int x dFn`; the zero atom contributes nothing.
pub fn first_moment(t: &TruncatedLevyMeasure) -> Result<Vec<f64>> {
    match &t.parent.form {
        MeasureForm::Atomic(m) => {
            let mut out = vec![0.0; m.dim()];
            for a in m.atoms().iter().filter(|a| t.keeps(&a.point)) {
                for (o, x) in out.iter_mut().zip(&a.point) {
                    *o += a.weight * x;
                }
            }
            Ok(out)
        }
        MeasureForm::Density(_) => Ok(vec![t.integrate_1d(|x| x)?]),
    }
}

/// Finds `eps_up` such that the first moment of the measure truncated to the
/// complement of `(eps_low, eps_up)` equals `target` (one-dimensional).
///
/// The moment is nonincreasing in `eps_up`; the root is bracketed by
/// geometric expansion and refined by bisection.
pub fn solve_truncation_levels(f: &LevyMeasure, eps_low: f64, target: f64) -> Result<f64> {
    if f.dim() != 1 {
        return invalid("solve_truncation_levels needs a one-dimensional measure");
    }
    if !(eps_low < 0.0) {
        return invalid(format!("eps_low must be negative, got {eps_low}"));
    }
    let moment = |e: f64| -> Result<f64> { Ok(first_moment(&truncate(f, eps_low, e)?)?[0]) };
    let upper_end = match &f.form {
        MeasureForm::Density(d) => d.upper,
        MeasureForm::Atomic(m) => m.atoms().iter().map(|a| a.point[0]).fold(0.0, f64::max) * 2.0 + 1.0,
    };
    // Bracket: moment(lo) >= target >= moment(hi).
    let mut lo = -eps_low;
    let mut hi = -eps_low;
    let mut m_lo = moment(lo)?;
    let mut m_hi = m_lo;
    let mut steps = 0;
    while m_hi > target {
        hi *= 2.0;
        steps += 1;
        if hi > upper_end || steps > 200 || hi > 1e12 {
            return Err(Error::NoSolution(format!(
                "first moment stays above {target} for every eps_up (value {m_hi} at {hi})"
            )));
        }
        m_hi = moment(hi)?;
    }
    steps = 0;
    while m_lo < target {
        lo *= 0.5;
        steps += 1;
        if steps > 200 || lo < 1e-300 {
            return Err(Error::NoSolution(format!(
                "first moment stays below {target} as eps_up -> 0 (value {m_lo} at {lo}); is int_0^1 x dF finite?"
            )));
        }
        m_lo = moment(lo)?;
    }
    if m_lo == target {
        return Ok(lo);
    }
    if m_hi == target {
        return Ok(hi);
    }
    let scale = f.clone();
    let tol = 1e-9 * (1.0 + target.abs()).max(first_moment_scale(&scale, eps_low, lo)?);
    for _ in 0..200 {
        // Geometric midpoint while the bracket spans orders of magnitude.
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let m = moment(mid)?;
        if (m - target).abs() <= tol {
            return Ok(mid);
        }
        if m > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-15 * hi {
            break;
        }
    }
    Err(Error::NumericalFailure(format!(
        "bisection for eps_up stagnated in [{lo:e}, {hi:e}] without reaching the target {target}"
    )))
}

/// Magnitude of the two one-sided first-moment contributions, used to scale
/// the root-finding tolerance.
fn first_moment_scale(f: &LevyMeasure, eps_low: f64, eps_up: f64) -> Result<f64> {
    let t = truncate(f, eps_low, eps_up)?;
    t.integrate_1d(|x| x.abs()).map(|v| v * 1e-3)
}

/// NIG Lévy density `delta alpha K1(alpha |x|) e^{beta x} / (pi |x|)`.
pub fn nig_levy_density(x: f64, alpha: f64, beta: f64, delta: f64) -> Result<f64> {
    if x == 0.0 || !x.is_finite() {
        return invalid(format!("NIG Lévy density is undefined at x = {x}"));
    }
    if !(alpha > 0.0 && delta > 0.0 && beta.abs() <= alpha) {
        return invalid(format!(
            "NIG parameters need alpha > 0, delta > 0, |beta| <= alpha (got {alpha}, {beta}, {delta})"
        ));
    }
    let z = alpha * x.abs();
    // K1(z) e^{beta x} = K1s(z) e^{beta x - z}, which neither under- nor
    // overflows for large |x|.
    Ok(delta * alpha * bessel_k1_scaled(z) * (beta * x - z).exp() / (PI * x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DominationMode {
    /// `f1 <= f2` everywhere.
    Global,
    /// `f1 >= f2` on the negative half-line and `f1 <= f2` on the positive one.
    SignSplit,
}

/// Pointwise density comparison on a grid of nonzero points (relative slack
/// 1e-12).
pub fn density_domination<F1, F2>(f1: F1, f2: F2, mode: DominationMode, grid: &[f64]) -> Result<bool>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    if mode == DominationMode::SignSplit && !(grid.iter().any(|x| *x < 0.0) && grid.iter().any(|x| *x > 0.0)) {
        return invalid("sign-split domination needs grid points of both signs");
    }
    let le = |a: f64, b: f64| a <= b + 1e-12 * a.abs().max(b.abs());
    Ok(grid.iter().all(|&x| {
        let (a, b) = (f1(x), f2(x));
        match mode {
            DominationMode::Global => le(a, b),
            DominationMode::SignSplit => {
                if x < 0.0 {
                    le(b, a)
                } else {
                    le(a, b)
                }
            }
        }
    }))
}

/// `x -> Fn((-inf, x])` of a one-dimensional truncated measure.
#[derive(Debug, Clone)]
pub struct LevyDistributionFunction {
    pub source: TruncatedLevyMeasure,
}

impl LevyDistributionFunction {
    pub fn new(source: TruncatedLevyMeasure) -> Result<Self> {
        if source.dim() != 1 {
            return invalid("Lévy distribution functions need one-dimensional measures");
        }
        Ok(Self { source })
    }

    pub fn try_cdf(&self, x: f64) -> Result<f64> {
        self.source.mass_between(f64::NEG_INFINITY, x)
    }

    /// Values on a sorted grid, accumulated piecewise (cheaper than
    /// independent evaluations and exactly monotone).
    pub fn evaluate_grid(&self, grid: &[f64]) -> Result<Vec<f64>> {
        if grid.windows(2).any(|w| w[0] > w[1]) {
            return invalid("grid must be sorted");
        }
        let mut out = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        let mut prev = f64::NEG_INFINITY;
        for &x in grid {
            // (prev, x] — the half-open piece avoids double-counting atoms.
            acc += self.source.mass_between(prev, x)? - self.atom_mass_at(prev);
            out.push(acc);
            prev = x;
        }
        Ok(out)
    }

    fn atom_mass_at(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return 0.0;
        }
        let zero = if x == 0.0 { self.source.zero_atom_weight } else { 0.0 };
        let atoms: f64 = self
            .source
            .surviving_atoms()
            .map(|a| a.iter().filter(|a| a.point[0] == x).map(|a| a.weight).sum())
            .unwrap_or(0.0);
        zero + atoms
    }
}

impl DistributionFunction for LevyDistributionFunction {
    fn cdf(&self, x: f64) -> f64 {
        self.try_cdf(x).unwrap_or(f64::NAN)
    }
    fn total_mass(&self) -> f64 {
        self.source.mass()
    }
}

/// Truncation levels `2^-n`, `n = 1..=n_max` (`n_max <= 20`).
pub fn dyadic_levels(n_max: u32) -> Result<Vec<f64>> {
    if n_max == 0 || n_max > 20 {
        return invalid(format!("truncation depth must be in 1..=20, got {n_max}"));
    }
    Ok((1..=n_max).map(|n| 0.5f64.powi(n as i32)).collect())
}

/// Inverse-CDF table for drawing jumps from a normalized finite measure.
///
/// Atoms are stored exactly; absolutely continuous parts are split into
/// fine cells (geometric near the origin) that are sampled uniformly, so the
/// CDF is exact at every cell boundary.
#[derive(Debug, Clone)]
pub struct JumpTable {
    dim: usize,
    entries: Vec<Entry>,
    /// Cumulative masses, normalized so the last entry is 1.
    cum: Vec<f64>,
    mass: f64,
}

#[derive(Debug, Clone)]
enum Entry {
    Point(Vec<f64>),
    Cell(f64, f64),
}

/// Geometric cell ratio for tabulated densities.
const CELL_RATIO: f64 = 1.01;

impl JumpTable {
    pub fn from_discrete(m: &DiscreteMeasure) -> Result<Self> {
        let mut raw: Vec<(Entry, f64, f64)> = m
            .atoms()
            .iter()
            .map(|a| (Entry::Point(a.point.clone()), a.weight, a.point[0]))
            .collect();
        if m.dim() == 1 {
            raw.sort_by(|a, b| a.2.total_cmp(&b.2));
        }
        Self::finish(m.dim(), raw.into_iter().map(|(e, w, _)| (e, w)).collect())
    }

    /// Table for a truncated measure (zero atom included).
    pub fn from_truncated(t: &TruncatedLevyMeasure) -> Result<Self> {
        match &t.parent.form {
            MeasureForm::Atomic(_) => Self::from_discrete(
                &t.to_discrete().ok_or_else(|| Error::InvalidArgument("truncated measure is empty".into()))?,
            ),
            MeasureForm::Density(d) => {
                let mut entries = Vec::new();
                let neg = side_cells(d, -t.eps_low, -d.lower, true)?;
                entries.extend(neg.into_iter().rev().map(|(a, b, w)| (Entry::Cell(-b, -a), w)));
                if t.zero_atom_weight > 0.0 {
                    entries.push((Entry::Point(vec![0.0]), t.zero_atom_weight));
                }
                entries.extend(side_cells(d, t.eps_up, d.upper, false)?.into_iter().map(|(a, b, w)| (Entry::Cell(a, b), w)));
                let table = Self::finish(1, entries)?;
                let rel = (table.mass - t.mass()).abs() / t.mass();
                if rel > 1e-7 {
                    return Err(Error::NumericalFailure(format!(
                        "jump table mass {} disagrees with quadrature mass {} (rel {rel:e})",
                        table.mass,
                        t.mass()
                    )));
                }
                Ok(table)
            }
        }
    }

    /// Table for a probability density on `[lower, upper]` (finite or not).
    pub fn from_density(d: &LevyDensity) -> Result<Self> {
        let mut entries = Vec::new();
        if d.lower < 0.0 {
            let neg = side_cells(d, 0.0, -d.lower, true)?;
            entries.extend(neg.into_iter().rev().map(|(a, b, w)| (Entry::Cell(-b, -a), w)));
        }
        if d.upper > 0.0 {
            let start = d.lower.max(0.0);
            entries.extend(side_cells(d, start, d.upper, false)?.into_iter().map(|(a, b, w)| (Entry::Cell(a, b), w)));
        }
        Self::finish(1, entries)
    }

    fn finish(dim: usize, entries: Vec<(Entry, f64)>) -> Result<Self> {
        let entries: Vec<(Entry, f64)> = entries.into_iter().filter(|(_, w)| *w > 0.0).collect();
        if entries.is_empty() {
            return invalid("cannot sample from an empty measure");
        }
        let mass: f64 = entries.iter().map(|(_, w)| w).sum();
        let mut cum = Vec::with_capacity(entries.len());
        let mut acc = 0.0;
        for (_, w) in &entries {
            acc += w;
            cum.push(acc / mass);
        }
        *cum.last_mut().expect("nonempty") = 1.0;
        Ok(Self { dim, entries: entries.into_iter().map(|(e, _)| e).collect(), cum, mass })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total mass of the tabulated measure.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Quantile function of the normalized law at `u` in `[0, 1)`, written
    /// into `out` (length `dim`).
    pub fn quantile_into(&self, u: f64, out: &mut [f64]) {
        let i = self.cum.partition_point(|c| *c <= u).min(self.cum.len() - 1);
        match &self.entries[i] {
            Entry::Point(p) => out.copy_from_slice(p),
            Entry::Cell(a, b) => {
                let start = if i == 0 { 0.0 } else { self.cum[i - 1] };
                let frac = ((u - start) / (self.cum[i] - start)).clamp(0.0, 1.0);
                out[0] = a + (b - a) * frac;
            }
        }
    }

    /// One-dimensional quantile.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut x = [0.0];
        self.quantile_into(u, &mut x);
        x[0]
    }
}

/// Cells `(a, b, mass)` covering `[from, to]` of the density (mirrored when
/// `negative`), in outward order. Cells grow geometrically away from the
/// origin; the far tail is cut once cells carry negligible mass.
fn side_cells(d: &LevyDensity, from: f64, to: f64, negative: bool) -> Result<Vec<(f64, f64, f64)>> {
    let g = |y: f64| if negative { d.eval(-y) } else { d.eval(y) };
    let (from, to) = (from.max(0.0), to);
    if !(from < to) {
        return Ok(Vec::new());
    }
    let mut cells = Vec::new();
    let mut running = 0.0;
    let mut x = from;
    // Near zero (or for a support starting at zero) use linear cells first.
    if x == 0.0 {
        let stop = to.min(1.0);
        let n = 2000;
        for i in 0..n {
            let (a, b) = (stop * i as f64 / n as f64, stop * (i + 1) as f64 / n as f64);
            let w = integrate(g, a, b, 1e-10)?.value;
            running += w;
            cells.push((a, b, w));
        }
        x = stop;
    }
    let mut quiet = 0;
    while x < to {
        let step = (x * (CELL_RATIO - 1.0)).max(1e-3 * (1.0 + x) * (CELL_RATIO - 1.0));
        let next = (x + step).min(to);
        let w = integrate(g, x, next, 1e-10)?.value;
        running += w;
        cells.push((x, next, w));
        x = next;
        if to.is_infinite() && w < 1e-17 * running {
            quiet += 1;
            if quiet > 20 {
                break;
            }
        } else {
            quiet = 0;
        }
        if cells.len() > 2_000_000 {
            return Err(Error::ResourceLimit("jump table grew beyond 2e6 cells".into()));
        }
    }
    Ok(cells)
}
