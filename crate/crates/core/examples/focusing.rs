//! Pump, signal and idler waists for a chosen focusing parameter ξ = L/b.
//!
//!     cargo run --example focusing

use pairsource::focusing::{waist_from_xi, FocusingPlan};

fn main() -> pairsource::Result<()> {
    let plan = FocusingPlan::from_xi(0.02, 473.0, 10.0, 87.0, 141.0)?;
    println!("xi {} -> pump waist {:.2} um", plan.xi, plan.pump_waist_um);
    println!("signal/idler collection waists {} / {} um", plan.signal_waist_um, plan.idler_waist_um);

    println!("\n{:>8} {:>12}", "xi", "waist um");
    for xi in [0.01, 0.02, 0.1, 0.5, 1.0, 2.84] {
        println!("{xi:>8} {:>12.2}", waist_from_xi(xi, 473.0, 10.0)?);
    }

    let back = FocusingPlan::from_pump_waist(plan.pump_waist_um, 473.0, 10.0, 87.0, 141.0)?;
    assert!(back.is_consistent());
    Ok(())
}
