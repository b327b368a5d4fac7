//! Exact order checks between discrete laws: stop-loss transforms, the
//! single-crossing (cut) criterion and a multivariate stochastic-order check.
//!
//! Run with `cargo run --release --example exact_orders`.

use stochorder::orders::{atom_grid, cut_criterion_1d, exact_order_check_1d, exact_st_check_multid, stop_loss, DiscreteMeasure, FunctionClass};

fn main() -> stochorder::Result<()> {
    let narrow = DiscreteMeasure::from_1d(&[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)])?;
    let wide = DiscreteMeasure::from_1d(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)])?;
    println!("  a   E(narrow - a)+  E(wide - a)+");
    for a in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        println!("{a:4}   {:12.4}  {:12.4}", stop_loss(&narrow, a), stop_loss(&wide, a));
    }
    let cut = cut_criterion_1d(&narrow, &wide, &atom_grid(&narrow, &wide))?;
    println!("single crossing: {} at {:?}", cut.single_crossing, cut.crossing);
    for class in [FunctionClass::St, FunctionClass::Cx, FunctionClass::Icx] {
        println!(
            "narrow <= wide in {class}: {}, wide <= narrow: {}",
            exact_order_check_1d(&narrow, &wide, class)?,
            exact_order_check_1d(&wide, &narrow, class)?
        );
    }

    // Two-dimensional laws: moving every atom up and to the right
    let lower = DiscreteMeasure::from_points(&[(vec![0.0, 0.0], 0.5), (vec![1.0, 0.0], 0.5)])?;
    let upper = DiscreteMeasure::from_points(&[(vec![0.5, 1.0], 0.5), (vec![1.0, 0.5], 0.5)])?;
    println!("2-d ST lower <= upper: {}", exact_st_check_multid(&lower, &upper)?);
    println!("2-d ST upper <= lower: {}", exact_st_check_multid(&upper, &lower)?);
    Ok(())
}
