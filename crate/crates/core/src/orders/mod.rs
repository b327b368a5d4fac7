//! Integral stochastic orders: generator families, exact checks on small
//! discrete measures, and Monte-Carlo order tests.
//!
//! An order `X <=_F Y` holds when `E f(X) <= E f(Y)` for every `f` in a class
//! `F`. The seven classes handled here are the usual stochastic order (ST),
//! convex (CX), directionally convex (DCX), supermodular (SM) and their
//! increasing variants (ICX, IDCX, ISM).

mod empirical;
mod exact;
mod family;
mod flow;
mod function;

pub use empirical::{empirical_order_test, FunctionResult, OrderTestConfig, OrderingReport, Tolerance, Verdict};
pub use exact::{
    atom_grid, cut_criterion_1d, exact_order_check_1d, exact_st_check_multid, likelihood_ratio_monotone,
    log_likelihood_ratio_monotone, stop_loss, Atom, CutResult, DiscreteMeasure, DistributionFunction,
    MAX_STRASSEN_SUPPORT,
};
pub use family::{
    direction_grid, generate_componentwise_family, generate_family, generate_family_with, membership_violations,
    AnchorSource, MAX_FAMILY_SIZE,
};
pub use flow::max_flow;
pub use function::{BlockFactor, Orientation, TestFunction};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// The order-generating function classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FunctionClass {
    St,
    Cx,
    Dcx,
    Sm,
    Icx,
    Idcx,
    Ism,
}

impl FunctionClass {
    pub const ALL: [FunctionClass; 7] = [
        FunctionClass::St,
        FunctionClass::Cx,
        FunctionClass::Dcx,
        FunctionClass::Sm,
        FunctionClass::Icx,
        FunctionClass::Idcx,
        FunctionClass::Ism,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            FunctionClass::St => "ST",
            FunctionClass::Cx => "CX",
            FunctionClass::Dcx => "DCX",
            FunctionClass::Sm => "SM",
            FunctionClass::Icx => "ICX",
            FunctionClass::Idcx => "IDCX",
            FunctionClass::Ism => "ISM",
        }
    }

    /// Whether members are componentwise nondecreasing.
    pub fn is_increasing(self) -> bool {
        matches!(self, FunctionClass::St | FunctionClass::Icx | FunctionClass::Idcx | FunctionClass::Ism)
    }

    /// Whether members are convex (in every direction).
    pub fn is_convex(self) -> bool {
        matches!(self, FunctionClass::Cx | FunctionClass::Icx)
    }

    /// Whether members are supermodular.
    pub fn is_supermodular(self) -> bool {
        matches!(self, FunctionClass::Sm | FunctionClass::Ism | FunctionClass::Dcx | FunctionClass::Idcx)
    }

    /// Whether members are convex along each coordinate axis.
    pub fn is_axis_convex(self) -> bool {
        matches!(self, FunctionClass::Dcx | FunctionClass::Idcx) || self.is_convex()
    }
}

impl fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for FunctionClass {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FunctionClass::ALL
            .into_iter()
            .find(|c| c.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::error::Error::InvalidArgument(format!("unknown function class `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_tags_round_trip() {
        for c in FunctionClass::ALL {
            assert_eq!(c.tag().parse::<FunctionClass>().unwrap(), c);
            let js = serde_json::to_string(&c).unwrap();
            assert_eq!(js, format!("\"{}\"", c.tag()));
        }
        assert!("xyz".parse::<FunctionClass>().is_err());
    }
}
