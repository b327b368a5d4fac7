//! Generalized hyperbolic laws as normal variance-mean mixtures: parameter
//! conditions that order the mixing laws, and a Monte Carlo check of the
//! resulting increasing convex order, including a two-time comparison.
//!
//! Run with `cargo run --release --example gh_comparison`.

use stochorder::harness::{check_gh_hypotheses, nig_two_time_test, run_comparison, Experiment, GhCase, Process};
use stochorder::orders::{FunctionClass, OrderTestConfig};
use stochorder::samplers::{GhParams, RngStream};

fn main() -> stochorder::Result<()> {
    let cases = [
        (GhCase::C28, GhParams::nig_1d(2.0, 0.0, 1.0, 0.0)?, GhParams::nig_1d(1.8, 0.3, 1.2, 0.1)?),
        (GhCase::C29, GhParams::nig_1d(2.0, 0.0, 1.0, 0.0)?, GhParams::nig_1d(1.5, 0.0, 1.5, 0.1)?),
        (GhCase::C30, GhParams::nig_1d(2.0, 0.2, 1.0, 0.0)?, GhParams::nig_1d(2.0, 0.5, 1.0, 0.0)?),
    ];
    for (i, (case, p1, p2)) in cases.into_iter().enumerate() {
        let hyp = check_gh_hypotheses(&p1, &p2, case)?;
        println!("{case:?}: hypotheses hold {}", hyp.all_pass());
        for c in &hyp.conditions {
            println!("    {:<28} {:?} {}", c.name, c.status, c.detail);
        }
        let mut exp = Experiment::new(format!("gh-{i}"), Process::Gh(p1), Process::Gh(p2), FunctionClass::Icx);
        exp.gh_case = Some(case);
        exp.plan.n = 50_000;
        let out = run_comparison(&exp, &RngStream::new(9, i as u64))?;
        println!("  increasing convex test: {}", out.verdict.as_str());
    }

    // the pair (X_1, X_2) at two times against its counterpart
    let p1 = GhParams::nig_1d(2.0, 0.0, 1.0, 0.0)?;
    let p2 = GhParams::nig_1d(1.5, 0.0, 1.5, 0.1)?;
    let cfg = OrderTestConfig { alpha: 0.01, ..Default::default() };
    let (rep, _, _) = nig_two_time_test(&p1, &p2, 1.0, 50_000, 5, &cfg, &RngStream::new(9, 100))?;
    println!("two-time increasing convex test: {} over {} functions", rep.verdict.as_str(), rep.family_size);
    Ok(())
}
