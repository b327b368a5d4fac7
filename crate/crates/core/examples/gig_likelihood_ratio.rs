//! Likelihood-ratio order between generalized inverse Gaussian laws: the
//! ratio of densities is monotone when lambda and delta increase and gamma
//! decreases, and reversing any one of these breaks it.
//!
//! Run with `cargo run --release --example gig_likelihood_ratio`.

use stochorder::orders::log_likelihood_ratio_monotone;
use stochorder::samplers::{gig_log_density, GigParams};

fn main() -> stochorder::Result<()> {
    let grid: Vec<f64> = (0..500).map(|i| 0.01 * 3000f64.powf(i as f64 / 499.0)).collect();
    let base = GigParams::new(-0.5, 1.0, 1.0)?;
    let cases = [
        ("larger lambda", GigParams::new(0.5, 1.0, 1.0)?),
        ("larger delta", GigParams::new(-0.5, 2.0, 1.0)?),
        ("smaller gamma", GigParams::new(-0.5, 1.0, 0.5)?),
        ("all three", GigParams::new(0.0, 1.5, 0.7)?),
        ("larger gamma", GigParams::new(-0.5, 1.0, 2.0)?),
        ("smaller lambda", GigParams::new(-1.5, 1.0, 1.0)?),
    ];
    for (label, other) in cases {
        let ordered = log_likelihood_ratio_monotone(|x| gig_log_density(x, &base), |x| gig_log_density(x, &other), &grid)?;
        println!("{label:<15} GIG({:.1}, {:.1}, {:.1}) <=lr GIG({:.1}, {:.1}, {:.1}): {ordered}",
            base.lambda, base.delta, base.gamma, other.lambda, other.delta, other.gamma);
    }
    Ok(())
}
