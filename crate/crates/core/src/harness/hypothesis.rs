//! Per-condition hypothesis verdicts and the combined experiment verdict.

use crate::orders::Verdict;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    /// Not machine-checkable; asserted by the user or checked only on a
    /// finite proxy.
    Assumed,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub conditions: Vec<Condition>,
    /// User-asserted hypotheses, each also listed as an `ASSUMED` condition.
    pub assumed_flags: Vec<String>,
}

impl HypothesisReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, status: Status, detail: impl Into<String>) {
        self.conditions.push(Condition { name: name.into(), status, detail: detail.into() });
    }

    pub fn check(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.push(name, Status::from_bool(ok), detail);
    }

    /// Records user-asserted hypotheses.
    pub fn assume_all(&mut self, flags: &[String]) {
        for f in flags {
            self.assumed_flags.push(f.clone());
            self.push(format!("assumed: {f}"), Status::Assumed, "asserted by the experiment definition");
        }
    }

    pub fn status_of(&self, name: &str) -> Option<Status> {
        self.conditions.iter().find(|c| c.name == name).map(|c| c.status)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| c.status == Status::Fail)
    }

    /// The conclusion is predicted when every condition is `PASS` or `ASSUMED`.
    pub fn predicted(&self) -> bool {
        !self.conditions.is_empty() && self.conditions.iter().all(|c| c.status != Status::Fail)
    }

    /// True when every condition is `PASS` (nothing assumed).
    pub fn all_pass(&self) -> bool {
        !self.conditions.is_empty() && self.conditions.iter().all(|c| c.status == Status::Pass)
    }
}

/// Hypothesis outcome combined with the Monte-Carlo order test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CombinedVerdict {
    /// Hypotheses hold and the order test agrees.
    #[serde(rename = "PREDICTED-CONFIRMED")]
    PredictedConfirmed,
    /// Hypotheses hold but the order test rejects the order: either an
    /// implementation bug or a false `ASSUMED` flag.
    #[serde(rename = "PREDICTED-VIOLATED")]
    PredictedViolated,
    /// Hypotheses hold and the test could not decide at this sample size.
    #[serde(rename = "PREDICTED-INCONCLUSIVE")]
    PredictedInconclusive,
    /// Some hypothesis fails, so the theory makes no prediction.
    #[serde(rename = "NOT-PREDICTED")]
    NotPredicted,
}

impl CombinedVerdict {
    pub fn combine(hypothesis: &HypothesisReport, order: Verdict) -> Self {
        if !hypothesis.predicted() {
            return CombinedVerdict::NotPredicted;
        }
        match order {
            Verdict::Consistent => CombinedVerdict::PredictedConfirmed,
            Verdict::Violation => CombinedVerdict::PredictedViolated,
            Verdict::Inconclusive => CombinedVerdict::PredictedInconclusive,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CombinedVerdict::PredictedConfirmed => "PREDICTED-CONFIRMED",
            CombinedVerdict::PredictedViolated => "PREDICTED-VIOLATED",
            CombinedVerdict::PredictedInconclusive => "PREDICTED-INCONCLUSIVE",
            CombinedVerdict::NotPredicted => "NOT-PREDICTED",
        }
    }

    /// Whether the outcome should make a batch run fail.
    pub fn is_failure(self) -> bool {
        self == CombinedVerdict::PredictedViolated
    }
}
