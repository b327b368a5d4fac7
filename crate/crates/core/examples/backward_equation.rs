//! Residual of the backward Kolmogorov equation dG/dt + A G = 0 for known
//! solutions of the heat equation, evaluated with finite differences.
//!
//! Run with `cargo run --release --example backward_equation`.

use stochorder::jumpdiff::{backward_residual, JumpDiffusionSpec};

fn main() -> stochorder::Result<()> {
    let bm = JumpDiffusionSpec::scalar(0.0, |_, _| 0.0, |_, _| 1.0);
    let quadratic = |t: f64, s: &[f64]| s[0] * s[0] + (1.0 - t);
    let quartic = |t: f64, s: &[f64]| {
        let tau = 1.0 - t;
        s[0].powi(4) + 6.0 * s[0] * s[0] * tau + 3.0 * tau * tau
    };
    let wrong = |t: f64, s: &[f64]| s[0] * s[0] + 2.0 * (1.0 - t);
    for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        println!(
            "h = {h:<8} s^2: {:9.2e}   s^4: {:9.2e}   not a solution: {:9.2e}",
            backward_residual(&bm, &quadratic, 0.5, &[0.3], h)?,
            backward_residual(&bm, &quartic, 0.5, &[0.3], h)?,
            backward_residual(&bm, &wrong, 0.5, &[0.3], h)?
        );
    }
    Ok(())
}
