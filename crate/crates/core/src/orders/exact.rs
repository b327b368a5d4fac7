//! Exact order checks for finitely supported measures.

use super::flow::FlowNetwork;
use super::FunctionClass;
use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

/// Largest combined support accepted by [`exact_st_check_multid`].
pub const MAX_STRASSEN_SUPPORT: usize = 200;

const MASS_REL_TOL: f64 = 1e-12;
const ORDER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub weight: f64,
}

/// A finite measure with finitely many atoms of positive weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return invalid("measure dimension must be positive");
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.point.len() != dim {
                return invalid(format!("atom {i} has dimension {} (expected {dim})", a.point.len()));
            }
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return invalid(format!("atom {i} has weight {} (must be positive and finite)", a.weight));
            }
            if a.point.iter().any(|x| !x.is_finite()) {
                return invalid(format!("atom {i} has a non-finite location"));
            }
        }
        Ok(Self { dim, atoms })
    }

    /// One-dimensional measure from `(location, weight)` pairs.
    pub fn from_1d(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(1, pairs.iter().map(|&(x, w)| Atom { point: vec![x], weight: w }).collect())
    }

    pub fn from_points(pairs: &[(Vec<f64>, f64)]) -> Result<Self> {
        let dim = pairs.first().map(|p| p.0.len()).unwrap_or(1);
        Self::new(dim, pairs.iter().map(|(x, w)| Atom { point: x.clone(), weight: *w }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// `int x m(dx)` (not normalized by the mass).
    pub fn first_moment(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for a in &self.atoms {
            for (acc, x) in m.iter_mut().zip(&a.point) {
                *acc += a.weight * x;
            }
        }
        m
    }

    /// `int f dm`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.point)).sum()
    }

    /// `m((-inf, x])` for a one-dimensional measure.
    pub fn cdf_1d(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.point[0] <= x).map(|a| a.weight).sum()
    }

    /// Largest absolute coordinate among the atoms.
    fn scale(&self) -> f64 {
        self.atoms
            .iter()
            .flat_map(|a| a.point.iter())
            .fold(0.0f64, |s, x| s.max(x.abs()))
    }
}

/// A (Lévy) distribution function `x -> M((-inf, x])` of a finite measure.
pub trait DistributionFunction {
    fn cdf(&self, x: f64) -> f64;
    fn total_mass(&self) -> f64;
}

impl DistributionFunction for DiscreteMeasure {
    fn cdf(&self, x: f64) -> f64 {
        self.cdf_1d(x)
    }
    fn total_mass(&self) -> f64 {
        self.mass()
    }
}

/// `sum_i w_i (x_i - a)_+` for a one-dimensional measure.
pub fn stop_loss(m: &DiscreteMeasure, a: f64) -> f64 {
    m.atoms.iter().map(|at| at.weight * (at.point[0] - a).max(0.0)).sum()
}

fn require_equal_mass(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<()> {
    let (a, b) = (m1.mass(), m2.mass());
    if (a - b).abs() > MASS_REL_TOL * a.max(b) {
        return invalid(format!("masses differ: {a} vs {b}"));
    }
    Ok(())
}

/// Sorted, deduplicated atom locations of two one-dimensional measures.
pub fn atom_grid(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Vec<f64> {
    let mut g: Vec<f64> = m1.atoms.iter().chain(&m2.atoms).map(|a| a.point[0]).collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

/// Exact comparison `m1 <=_class m2` of one-dimensional discrete measures.
///
/// On the line DCX coincides with CX, IDCX with ICX and ISM with ST; the
/// supermodular class contains every function of one variable, so SM holds
/// only when the measures are equal.
pub fn exact_order_check_1d(m1: &DiscreteMeasure, m2: &DiscreteMeasure, class: FunctionClass) -> Result<bool> {
    if m1.dim != 1 || m2.dim != 1 {
        return invalid("exact_order_check_1d needs one-dimensional measures");
    }
    require_equal_mass(m1, m2)?;
    let grid = atom_grid(m1, m2);
    let tol = ORDER_TOL * (1.0 + m1.mass().max(m2.mass()) * m1.scale().max(m2.scale()));
    let icx = || grid.iter().all(|&a| stop_loss(m1, a) <= stop_loss(m2, a) + tol);
    let same_mean = || (m1.first_moment()[0] - m2.first_moment()[0]).abs() <= tol;
    let st = || grid.iter().all(|&x| m1.cdf_1d(x) + tol >= m2.cdf_1d(x));
    Ok(match class {
        FunctionClass::St | FunctionClass::Ism => st(),
        FunctionClass::Icx | FunctionClass::Idcx => icx(),
        FunctionClass::Cx | FunctionClass::Dcx => same_mean() && icx(),
        FunctionClass::Sm => grid.iter().all(|&x| (m1.cdf_1d(x) - m2.cdf_1d(x)).abs() <= tol),
    })
}

/// Decides `m1 <=_st m2` on `R^d` through Strassen's theorem: the order holds
/// iff a coupling supported on `{x <= y}` exists, i.e. iff the bipartite
/// transport network saturates.
pub fn exact_st_check_multid(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> Result<bool> {
    if m1.dim != m2.dim {
        return invalid(format!("dimension mismatch: {} vs {}", m1.dim, m2.dim));
    }
    let support = m1.len() + m2.len();
    if support > MAX_STRASSEN_SUPPORT {
        return Err(Error::ResourceLimit(format!(
            "combined support {support} exceeds {MAX_STRASSEN_SUPPORT} points"
        )));
    }
    require_equal_mass(m1, m2)?;
    let n1 = m1.len();
    let source = n1 + m2.len();
    let sink = source + 1;
    let mut g = FlowNetwork::new(sink + 1);
    for (i, a) in m1.atoms.iter().enumerate() {
        g.add_edge(source, i, a.weight);
    }
    for (j, b) in m2.atoms.iter().enumerate() {
        g.add_edge(n1 + j, sink, b.weight);
    }
    for (i, a) in m1.atoms.iter().enumerate() {
        for (j, b) in m2.atoms.iter().enumerate() {
            if a.point.iter().zip(&b.point).all(|(x, y)| x <= y) {
                g.add_edge(i, n1 + j, f64::INFINITY);
            }
        }
    }
    let flow = g.max_flow(source, sink);
    let mass = m1.mass();
    Ok(flow >= mass - ORDER_TOL * mass.max(1.0))
}

/// Outcome of the single-crossing (cut) criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutResult {
    pub single_crossing: bool,
    pub crossing: Option<f64>,
}

/// Checks that `F1 - F2` is `<= 0` up to some grid point `x_n` and `>= 0`
/// from there on. Returns the leftmost such `x_n`.
///
/// For discrete measures the grid should contain every atom (see
/// [`atom_grid`]); the difference is constant between atoms, so the check is
/// then exact.
pub fn cut_criterion_1d<A, B>(f1: &A, f2: &B, grid: &[f64]) -> Result<CutResult>
where
    A: DistributionFunction + ?Sized,
    B: DistributionFunction + ?Sized,
{
    if grid.len() < 2 {
        return invalid("cut criterion needs a grid of at least two points");
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("cut criterion grid must be strictly increasing");
    }
    let (a, b) = (f1.total_mass(), f2.total_mass());
    if (a - b).abs() > 1e-9 * a.max(b).max(1e-300) {
        return invalid(format!("total masses differ: {a} vs {b}"));
    }
    let tol = ORDER_TOL * a.max(b).max(1.0);
    let diff: Vec<f64> = grid.iter().map(|&x| f1.cdf(x) - f2.cdf(x)).collect();
    // suffix_ok[k]: every difference from k on is >= -tol
    let mut suffix_ok = vec![true; diff.len() + 1];
    for k in (0..diff.len()).rev() {
        suffix_ok[k] = suffix_ok[k + 1] && diff[k] >= -tol;
    }
    // x_n = grid[k] needs diff <= tol strictly before k and >= -tol from k on
    for k in 0..diff.len() {
        if suffix_ok[k] {
            return Ok(CutResult { single_crossing: true, crossing: Some(grid[k]) });
        }
        if diff[k] > tol {
            break;
        }
    }
    Ok(CutResult { single_crossing: false, crossing: None })
}

fn check_lr_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 50 {
        return invalid(format!("likelihood-ratio grid needs at least 50 points, got {}", grid.len()));
    }
    if grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return invalid("likelihood-ratio grid must contain positive finite points");
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid("likelihood-ratio grid must be strictly increasing");
    }
    Ok(())
}

/// True iff `d1 / d2` is nonincreasing along `grid` (relative slack 1e-10),
/// i.e. the first law is smaller in the likelihood-ratio order.
pub fn likelihood_ratio_monotone<F1, F2>(d1: F1, d2: F2, grid: &[f64]) -> Result<bool>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    check_lr_grid(grid)?;
    let mut prev: Option<f64> = None;
    for &x in grid {
        let (p, q) = (d1(x), d2(x));
        if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
            return invalid(format!("density values must be positive at x = {x}: got {p}, {q}"));
        }
        let r = p / q;
        if let Some(prev) = prev {
            if r > prev * (1.0 + 1e-10) {
                return Ok(false);
            }
        }
        prev = Some(r);
    }
    Ok(true)
}

/// Same as [`likelihood_ratio_monotone`] but on log densities, which avoids
/// underflow far in the tails.
pub fn log_likelihood_ratio_monotone<F1, F2>(ld1: F1, ld2: F2, grid: &[f64]) -> Result<bool>
where
    F1: Fn(f64) -> f64,
    F2: Fn(f64) -> f64,
{
    check_lr_grid(grid)?;
    let slack = 1e-10f64.ln_1p();
    let mut prev: Option<f64> = None;
    for &x in grid {
        let (p, q) = (ld1(x), ld2(x));
        if !(p.is_finite() && q.is_finite()) {
            return invalid(format!("log densities must be finite at x = {x}: got {p}, {q}"));
        }
        let r = p - q;
        if let Some(prev) = prev {
            if r > prev + slack {
                return Ok(false);
            }
        }
        prev = Some(r);
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(p: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_1d(p).unwrap()
    }

    #[test]
    fn stop_loss_examples() {
        assert_eq!(stop_loss(&m(&[(0.5, 1.0)]), 0.0), 0.5);
        assert_eq!(stop_loss(&m(&[(0.0, 0.5), (1.0, 0.5)]), 0.5), 0.25);
        assert_eq!(stop_loss(&m(&[(0.0, 0.5), (1.0, 0.5)]), 2.0), 0.0);
    }

    #[test]
    fn exact_1d_examples() {
        let point = m(&[(0.5, 1.0)]);
        let spread = m(&[(0.0, 0.5), (1.0, 0.5)]);
        assert!(exact_order_check_1d(&point, &spread, FunctionClass::Cx).unwrap());
        assert!(!exact_order_check_1d(&spread, &point, FunctionClass::Cx).unwrap());
        assert!(exact_order_check_1d(&point, &spread, FunctionClass::Dcx).unwrap());
        assert!(exact_order_check_1d(&m(&[(0.0, 1.0)]), &m(&[(1.0, 1.0)]), FunctionClass::St).unwrap());
        assert!(!exact_order_check_1d(&m(&[(1.0, 1.0)]), &m(&[(0.0, 1.0)]), FunctionClass::St).unwrap());
        // SM on the line: only equal measures compare
        assert!(!exact_order_check_1d(&point, &spread, FunctionClass::Sm).unwrap());
        assert!(exact_order_check_1d(&spread, &spread.clone(), FunctionClass::Sm).unwrap());
        // shift up is ICX but not CX
        let shifted = m(&[(0.5, 0.5), (1.5, 0.5)]);
        assert!(exact_order_check_1d(&spread, &shifted, FunctionClass::Icx).unwrap());
        assert!(!exact_order_check_1d(&spread, &shifted, FunctionClass::Cx).unwrap());
    }

    #[test]
    fn unequal_mass_is_an_error() {
        let r = exact_order_check_1d(&m(&[(0.0, 1.0)]), &m(&[(0.0, 2.0)]), FunctionClass::St);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_weight_rejected() {
        assert!(DiscreteMeasure::from_1d(&[(0.0, 0.0)]).is_err());
        assert!(DiscreteMeasure::from_1d(&[(0.0, -1.0)]).is_err());
    }

    #[test]
    fn strassen_examples() {
        let a = DiscreteMeasure::from_points(&[(vec![0.0, 1.0], 0.5), (vec![1.0, 0.0], 0.5)]).unwrap();
        let b = DiscreteMeasure::from_points(&[(vec![1.0, 1.0], 1.0)]).unwrap();
        assert!(exact_st_check_multid(&a, &b).unwrap());
        assert!(!exact_st_check_multid(&b, &a).unwrap());
        assert!(exact_st_check_multid(&a, &a.clone()).unwrap());
        let p = DiscreteMeasure::from_points(&[(vec![0.0, 0.0], 1.0)]).unwrap();
        assert!(exact_st_check_multid(&p, &b).unwrap());
        // marginals ordered but no monotone coupling: (0,1),(1,0) vs (0,0),(1,1)
        let c = DiscreteMeasure::from_points(&[(vec![0.0, 0.0], 0.5), (vec![1.0, 1.0], 0.5)]).unwrap();
        assert!(!exact_st_check_multid(&a, &c).unwrap());
        assert!(!exact_st_check_multid(&c, &a).unwrap());
    }

    #[test]
    fn strassen_support_limit() {
        let pts: Vec<(Vec<f64>, f64)> = (0..101).map(|i| (vec![i as f64], 1.0)).collect();
        let big = DiscreteMeasure::from_points(&pts).unwrap();
        assert!(matches!(exact_st_check_multid(&big, &big), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn cut_examples() {
        let g: Vec<f64> = (0..=60).map(|i| -3.0 + 0.1 * i as f64).collect();
        let a = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let r = cut_criterion_1d(&a, &a, &g).unwrap();
        assert_eq!(r, CutResult { single_crossing: true, crossing: Some(g[0]) });

        let b = m(&[(-2.0, 0.5), (2.0, 0.5)]);
        let r = cut_criterion_1d(&a, &b, &g).unwrap();
        let x = r.crossing.unwrap();
        assert!(r.single_crossing && (-1.0..=1.0).contains(&x), "{r:?}");
        assert!(exact_order_check_1d(&a, &b, FunctionClass::Cx).unwrap());

        let c = m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
        let d = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let r = cut_criterion_1d(&c, &d, &g).unwrap();
        assert_eq!(r, CutResult { single_crossing: false, crossing: None });
        assert!(cut_criterion_1d(&c, &d, &[0.0]).is_err());
    }

    #[test]
    fn likelihood_ratio_checks() {
        let grid: Vec<f64> = (1..=60).map(|i| 0.1 * i as f64).collect();
        let e1 = |x: f64| (-x).exp();
        let e2 = |x: f64| 0.5 * (-0.5 * x).exp();
        assert!(likelihood_ratio_monotone(e1, e1, &grid).unwrap());
        assert!(likelihood_ratio_monotone(e1, e2, &grid).unwrap());
        assert!(!likelihood_ratio_monotone(e2, e1, &grid).unwrap());
        assert!(likelihood_ratio_monotone(|_| 0.0, e1, &grid).is_err());
        assert!(likelihood_ratio_monotone(e1, e2, &grid[..10]).is_err());
        assert!(log_likelihood_ratio_monotone(|x| -x, |x| -0.5 * x, &grid).unwrap());
    }
}
