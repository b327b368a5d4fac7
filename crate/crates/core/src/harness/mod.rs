//! Runnable experiments: hypothesis checks on concrete process pairs,
//! sampling of both sides, and empirical tests of the concluded order.

pub mod comparison;
pub mod gh;
pub mod hypothesis;
pub mod measures;
pub mod nig;
pub mod process;
pub mod sweep;
pub mod table1;

pub use comparison::{
    check_hypotheses, normal_process, run_comparison, ComparisonOutcome, Experiment, SamplingMode, SamplingPlan,
    NORMAL_CASES,
};
pub use gh::{check_gh_hypotheses, nig_two_time_test, GhCase};
pub use hypothesis::{CombinedVerdict, Condition, HypothesisReport, Status};
pub use measures::{compare_levy_measures, compare_truncated_1d, MeasureComparison};
pub use nig::{run_nig_example, NigExample, NigExampleOutcome, NigExampleParams};
pub use process::{Characteristics, CompoundPoissonProcess, Process, TerminalSampling};
pub use sweep::{run_truncation_sweep, DriftData, SweepLevel, SweepReport, SweepSampling};
pub use table1::{check_table1, check_table1_on, default_state_points, StatePoints};
