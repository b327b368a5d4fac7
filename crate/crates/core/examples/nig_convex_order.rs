//! Symmetric normal inverse Gaussian processes ordered through their Lévy
//! densities: a smaller tail parameter alpha, or a larger scale delta, gives
//! the process that is larger in convex order.
//!
//! Run with `cargo run --release --example nig_convex_order`.

use stochorder::harness::{run_nig_example, NigExample, NigExampleParams};
use stochorder::orders::OrderTestConfig;
use stochorder::samplers::RngStream;

fn main() -> stochorder::Result<()> {
    let params = NigExampleParams::new(1.0, 2.0, 1.0);
    let cfg = OrderTestConfig { alpha: 0.01, ..Default::default() };
    for (k, ex) in [NigExample::Alpha, NigExample::Delta].into_iter().enumerate() {
        let out = run_nig_example(ex, &params, 200_000, &cfg, &RngStream::new(5, k as u64))?;
        let [(a1, d1), (a2, d2)] = params.alpha_delta(ex);
        println!("{ex:?}: NIG(alpha {a1}, delta {d1}) vs NIG(alpha {a2}, delta {d2})");
        println!("  hypotheses hold: {}", out.hypothesis.all_pass());
        println!("  smaller process: {}", out.smaller);
        println!(
            "  variances {:.4} / {:.4} (exact {:.4} / {:.4})",
            out.variances[0], out.variances[1], out.exact_variances[0], out.exact_variances[1]
        );
        println!("  convex-order test: {}", out.ordering.verdict.as_str());
    }
    Ok(())
}
