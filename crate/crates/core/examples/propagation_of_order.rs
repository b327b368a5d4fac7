//! Propagation of order for a jump diffusion: the value function
//! G(t, s) = E g(X_T | X_t = s) of an increasing convex payoff stays
//! increasing and convex in s at every earlier time.
//!
//! Run with `cargo run --release --example propagation_of_order`.

use std::sync::Arc;
use stochorder::jumpdiff::{check_propagation_of_order, estimate_propagation, EulerConfig, IntensityMeasure, JumpDiffusionSpec, JumpLink, JumpShape, ScalarField, StateGrid};
use stochorder::levy::LevyDensity;
use stochorder::orders::FunctionClass;
use stochorder::samplers::RngStream;

fn main() -> stochorder::Result<()> {
    let identity: JumpShape = Arc::new(|_, y, out| out[0] = y);
    let phi: ScalarField = Arc::new(|_, s| 0.05 + 0.1 * s[0].max(0.0));
    let jumps = IntensityMeasure::Density(LevyDensity::new("uniform", -1.0, 1.0, |_| 0.5)?);
    let spec = JumpDiffusionSpec::scalar(0.0, |_, s| 0.1 * s, |_, s| 0.2 * s.max(0.0) + 0.05)
        .with_jumps(JumpLink::Factored { phi, psi: identity }, jumps)?;

    let grid = StateGrid::uniform(-1.0, 1.0, 9)?;
    let times = [0.0, 0.5, 1.0];
    let cfg = EulerConfig::new(0.0, 1.0, 64, 20_000, RngStream::new(17, 0));
    let est = estimate_propagation(&spec, |s: &[f64]| s[0].max(0.0), &grid, &times, &cfg)?;
    for (ti, t) in times.iter().enumerate() {
        let row: Vec<String> = est.values[ti].iter().map(|v| format!("{v:.3}")).collect();
        println!("G({t}, s) = {}", row.join(" "));
    }
    let rep = check_propagation_of_order(&est, FunctionClass::Icx)?;
    println!(
        "{} of {} monotonicity and convexity checks violated beyond sampling error",
        rep.total_violations(),
        rep.total_checks()
    );
    Ok(())
}
