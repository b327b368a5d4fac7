//! Finite-state Markov chains whose kernels are separated by a monotone
//! middle kernel: the finite-dimensional distributions stay ordered. Also
//! shows a kernel that preserves the order in one step but not on paths.
//!
//! Run with `cargo run --release --example markov_separation`.

use stochorder::markov::{kernel_monotone, kernel_separated, random_separated_instance, verify_fdd_ordering, FiniteChainSpec, FiniteKernel};
use stochorder::orders::FunctionClass;
use stochorder::samplers::RngStream;

fn main() -> stochorder::Result<()> {
    let mut rng = RngStream::new(11, 0).rng();
    for class in [FunctionClass::St, FunctionClass::Icx, FunctionClass::Cx] {
        let inst = random_separated_instance(&mut rng, 4, class, 3)?;
        let separated = kernel_separated(&inst.chain1.kernel, &inst.middle, &inst.chain2.kernel, class)?;
        let monotone = kernel_monotone(&inst.middle, class)?;
        let fdd = verify_fdd_ordering(&inst.chain1, &inst.chain2, class, 3)?;
        println!(
            "{class:<4} separated {separated}, middle monotone {monotone}, paths (X0, X1, X2) ordered {} over {} generators",
            fdd.holds, fdd.family_size
        );
    }

    // Qy is affine and Q keeps hinges convex, yet x (Qy)(x) is concave.
    let states = vec![0.0, 1.0, 2.0];
    let q = FiniteKernel::new(states, vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.25, 0.75], vec![0.0, 0.5, 0.5]])?;
    let point = FiniteChainSpec::new(vec![0.0, 1.0, 0.0], q.clone(), 2)?;
    let spread = FiniteChainSpec::new(vec![0.5, 0.0, 0.5], q.clone(), 2)?;
    println!("\nkernel monotone for CX: {}", kernel_monotone(&q, FunctionClass::Cx)?);
    for m in 1..=2 {
        let v = verify_fdd_ordering(&point, &spread, FunctionClass::Cx, m)?;
        print!("  {m} time point(s): ordered {}", v.holds);
        if let Some(w) = v.witness {
            print!(" (witness {}: {:.4} > {:.4})", w.function.params(), w.expectation_1, w.expectation_2);
        }
        println!();
    }
    Ok(())
}
