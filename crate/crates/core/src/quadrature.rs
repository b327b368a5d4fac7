//! Adaptive Gauss-Kronrod (7/15) quadrature with bisection refinement.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Absolute error floor below which intervals are never split.
pub const ABS_FLOOR: f64 = 1e-14;

const MAX_INTERVALS: usize = 20_000;

// Kronrod abscissae on [-1, 1] (positive half, descending), QUADPACK qk15.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (7-point rule).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the finite interval `[a, b]` to relative tolerance
/// `rel_tol` (with an absolute floor of [`ABS_FLOOR`]).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quadrature> {
    integrate_with_floor(f, a, b, rel_tol, ABS_FLOOR)
}

pub fn integrate_with_floor<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "integrate needs finite limits, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, intervals: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let (v, e) = gk15(&f, lo, hi);
    let mut total = v;
    let mut total_err = e;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a: lo, b: hi, value: v, error: e });
    while total_err > (rel_tol * total.abs()).max(abs_floor) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::NumericalFailure(format!(
                "quadrature on [{lo}, {hi}] did not converge: estimate {total:e}, error {total_err:e}, {} intervals",
                heap.len()
            )));
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::NumericalFailure(format!(
                "quadrature interval collapsed near {mid:e} (estimate {total:e}, error {total_err:e})"
            )));
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2 });
        if !total.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite integrand on [{lo}, {hi}]"
            )));
        }
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value: f64 = segs.iter().map(|s| s.value).sum();
    let error: f64 = segs.iter().map(|s| s.error).sum();
    Ok(Quadrature { value: sign * value, error, intervals: segs.len() })
}

/// Integrates `f` over `[a, +inf)` via the substitution `x = a + t / (1 - t)`.
pub fn integrate_upper_tail<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64) -> Result<Quadrature> {
    let g = |t: f64| {
        let u = 1.0 - t;
        let x = a + t / u;
        let v = f(x) / (u * u);
        if v.is_finite() { v } else { 0.0 }
    };
    integrate(g, 0.0, 1.0, rel_tol)
}

/// Integrates `f` over `(-inf, b]`.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, rel_tol: f64) -> Result<Quadrature> {
    integrate_upper_tail(|y| f(-y), -b, rel_tol)
}

/// Integrates over an interval whose endpoints may be infinite.
pub fn integrate_range<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quadrature> {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate(f, a, b, rel_tol),
        (true, false) if b > 0.0 => integrate_upper_tail(f, a, rel_tol),
        (false, true) if a < 0.0 => integrate_lower_tail(f, b, rel_tol),
        (false, false) if a < 0.0 && b > 0.0 => {
            let left = integrate_lower_tail(&f, 0.0, rel_tol)?;
            let right = integrate_upper_tail(&f, 0.0, rel_tol)?;
            Ok(Quadrature {
                value: left.value + right.value,
                error: left.error + right.error,
                intervals: left.intervals + right.intervals,
            })
        }
        _ => Err(Error::InvalidArgument(format!("bad integration range [{a}, {b}]"))),
    }
}
