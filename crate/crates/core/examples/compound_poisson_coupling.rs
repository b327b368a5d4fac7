//! Two compound Poisson processes with the same jump clock: jumps of fixed
//! size 1/2 against uniform(0, 1) jumps. Sharing the clock and coupling the
//! jump sizes comonotonically makes the pair a martingale coupling, so the
//! point-mass process is smaller in convex order.
//!
//! Run with `cargo run --release --example compound_poisson_coupling`.

use stochorder::levy::LevyDensity;
use stochorder::orders::{empirical_order_test, generate_family, DiscreteMeasure, FunctionClass, OrderTestConfig};
use stochorder::samplers::{sample_compound_poisson_coupled, CompoundPoissonSpec, Coupling, RngStream};
use stochorder::{stats, SampleMatrix};

fn main() -> stochorder::Result<()> {
    let point = DiscreteMeasure::from_1d(&[(0.5, 1.0)])?;
    let uniform = LevyDensity::new("U(0,1)", 0.0, 1.0, |_| 1.0)?;
    let spec1 = CompoundPoissonSpec::new(vec![0.0], 1.0, &point)?;
    let spec2 = CompoundPoissonSpec::with_density(vec![0.0], 1.0, &uniform)?;

    let n = 200_000;
    let paths = sample_compound_poisson_coupled(&spec1, &spec2, &[1.0], n, Coupling::SharedClockComonotone, &RngStream::new(3, 0))?;
    assert_eq!(paths.jump_counts1, paths.jump_counts2);
    let (x, y) = (paths.terminal1(), paths.terminal2());
    println!("means     {:.4} {:.4} (both 0.5)", stats::mean(x.as_slice()), stats::mean(y.as_slice()));
    println!("variances {:.4} {:.4} (exact 0.25 and 0.3333)", stats::variance(x.as_slice()), stats::variance(y.as_slice()));

    let pooled = SampleMatrix::new(1, x.as_slice().iter().chain(y.as_slice()).copied().collect())?;
    let family = generate_family(FunctionClass::Cx, 1, 7, Some(&pooled))?;
    let cfg = OrderTestConfig { alpha: 0.01, paired: true, ..Default::default() };
    let report = empirical_order_test(&x, &y, &family, &cfg)?;
    println!("paired convex-order test: {}", report.verdict.as_str());
    Ok(())
}
