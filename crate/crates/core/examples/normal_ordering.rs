//! Brownian motions with drift: which orderings do the closed-form
//! conditions predict, and does a Monte Carlo test agree?
//!
//! Run with `cargo run --release --example normal_ordering`.

use nalgebra::DMatrix;
use stochorder::harness::{check_hypotheses, normal_process, run_comparison, Experiment};
use stochorder::orders::FunctionClass;
use stochorder::samplers::RngStream;

fn main() -> stochorder::Result<()> {
    let independent = DMatrix::<f64>::identity(2, 2);
    let correlated = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let pairs = [
        ("location shift", vec![0.3, 0.1], independent.clone()),
        ("added correlation", vec![0.0, 0.0], correlated),
        ("larger variance", vec![0.0, 0.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])),
    ];
    for (k, (label, mu2, sigma2)) in pairs.into_iter().enumerate() {
        println!("{label}: N(0, I) vs N({mu2:?}, {:?})", sigma2.as_slice());
        for class in [FunctionClass::St, FunctionClass::Cx, FunctionClass::Dcx, FunctionClass::Icx, FunctionClass::Idcx] {
            let p1 = normal_process(vec![0.0, 0.0], independent.clone())?;
            let p2 = normal_process(mu2.clone(), sigma2.clone())?;
            let mut exp = Experiment::new(format!("{label}-{class}"), p1, p2, class);
            exp.plan.n = 50_000;
            let stream = RngStream::new(7, 10 * k as u64);
            if !check_hypotheses(&exp, &stream)?.predicted() {
                println!("  {class:<5} not predicted");
                continue;
            }
            let out = run_comparison(&exp, &stream)?;
            println!("  {class:<5} {} ({} test functions)", out.verdict.as_str(), out.ordering.family_size);
        }
    }
    Ok(())
}
