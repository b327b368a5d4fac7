//! Parametric test functions.

use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Orientation of a hinge product: `Up` multiplies `(x_i - a_i)_+`,
/// `Down` multiplies `(a_i - x_i)_+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Up,
    Down,
}

/// A factor of a [`TestFunction::BlockProduct`], acting on the coordinates
/// `offset .. offset + function.dim()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFactor {
    pub offset: usize,
    pub function: TestFunction,
}

/// A test function `R^d -> R`.
///
/// `None` entries in anchor vectors mean "coordinate unused": the orthant
/// indicator does not constrain that axis and the hinge product skips it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TestFunction {
    /// `max(theta . x - a, 0)`
    Hinge { direction: Vec<f64>, anchor: f64 },
    /// `|theta . x - a|`
    AbsHinge { direction: Vec<f64>, anchor: f64 },
    /// `sign * theta . x`
    Linear { direction: Vec<f64>, sign: f64 },
    /// `prod_i 1{x_i > a_i}`
    OrthantIndicator { anchors: Vec<Option<f64>> },
    /// `prod_i max(x_i - a_i, 0)` (or `max(a_i - x_i, 0)` for `Down`)
    HingeProduct { anchors: Vec<Option<f64>>, orientation: Orientation },
    /// Product of functions of disjoint coordinate blocks; used for the
    /// componentwise families on stacked time points.
    BlockProduct { factors: Vec<BlockFactor> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Hinge { direction, anchor } => (dot(direction, x) - anchor).max(0.0),
            TestFunction::AbsHinge { direction, anchor } => (dot(direction, x) - anchor).abs(),
            TestFunction::Linear { direction, sign } => sign * dot(direction, x),
            TestFunction::OrthantIndicator { anchors } => {
                let inside = anchors
                    .iter()
                    .zip(x)
                    .all(|(a, xi)| a.is_none_or(|a| *xi > a));
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::HingeProduct { anchors, orientation } => {
                let mut p = 1.0;
                for (a, xi) in anchors.iter().zip(x) {
                    if let Some(a) = a {
                        let h = match orientation {
                            Orientation::Up => xi - a,
                            Orientation::Down => a - xi,
                        };
                        if h <= 0.0 {
                            return 0.0;
                        }
                        p *= h;
                    }
                }
                p
            }
            TestFunction::BlockProduct { factors } => {
                let mut p = 1.0;
                for f in factors {
                    let d = f.function.dim();
                    p *= f.function.eval(&x[f.offset..f.offset + d]);
                    if p == 0.0 {
                        return 0.0;
                    }
                }
                p
            }
        }
    }

    /// Number of coordinates the function reads.
    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Hinge { direction, .. }
            | TestFunction::AbsHinge { direction, .. }
            | TestFunction::Linear { direction, .. } => direction.len(),
            TestFunction::OrthantIndicator { anchors } | TestFunction::HingeProduct { anchors, .. } => {
                anchors.len()
            }
            TestFunction::BlockProduct { factors } => factors
                .iter()
                .map(|f| f.offset + f.function.dim())
                .max()
                .unwrap_or(0),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TestFunction::Hinge { .. } => "HINGE",
            TestFunction::AbsHinge { .. } => "ABS_HINGE",
            TestFunction::Linear { .. } => "LINEAR",
            TestFunction::OrthantIndicator { .. } => "ORTHANT_INDICATOR",
            TestFunction::HingeProduct { .. } => "HINGE_PRODUCT",
            TestFunction::BlockProduct { .. } => "BLOCK_PRODUCT",
        }
    }

    /// True when the function never takes negative values.
    pub fn is_nonnegative(&self) -> bool {
        !matches!(self, TestFunction::Linear { .. })
    }

    /// Compact, comma-free parameter description (safe inside a CSV cell).
    pub fn params(&self) -> String {
        let vec = |v: &[f64]| {
            let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            format!("[{}]", parts.join(" "))
        };
        let opt = |v: &[Option<f64>]| {
            let parts: Vec<String> = v
                .iter()
                .map(|x| x.map_or_else(|| "-inf".to_string(), |x| format!("{x}")))
                .collect();
            format!("[{}]", parts.join(" "))
        };
        match self {
            TestFunction::Hinge { direction, anchor } | TestFunction::AbsHinge { direction, anchor } => {
                format!("theta={} a={anchor}", vec(direction))
            }
            TestFunction::Linear { direction, sign } => format!("theta={} sign={sign}", vec(direction)),
            TestFunction::OrthantIndicator { anchors } => format!("a={}", opt(anchors)),
            TestFunction::HingeProduct { anchors, orientation } => {
                format!("a={} orientation={orientation:?}", opt(anchors))
            }
            TestFunction::BlockProduct { factors } => {
                let mut s = String::new();
                for (i, f) in factors.iter().enumerate() {
                    if i > 0 {
                        s.push_str(" * ");
                    }
                    let _ = write!(s, "@{}:{}({})", f.offset, f.function.kind(), f.function.params());
                }
                s
            }
        }
    }
}
