//! Signal wavelength and emission bandwidth of a 10 mm ppKTP crystal as the
//! pump is tuned with the idler held at 1550 nm.
//!
//!     cargo run --example tuning_curve

use pairsource::phasematch::{emission_bandwidth, solve_poling_period, tuning_curve, CrystalSpec, PeriodMode, SpdcTriple};

fn main() -> pairsource::Result<()> {
    let spec = CrystalSpec::ppktp_10mm(40.0);
    let design = SpdcTriple::from_pump_and(473.0, 1550.0)?;
    let period = solve_poling_period(&spec, &design)?;
    println!("design: signal {:.4} nm, poling period {period:.4} um", design.signal_nm);
    println!("emission FWHM at 473 nm: {:.1} GHz\n", emission_bandwidth(&spec, 473.0, 1550.0)?);

    println!("{:>9} {:>10} {:>10} {:>10}", "pump nm", "signal nm", "period um", "FWHM GHz");
    for p in tuning_curve(&spec, (450.0, 500.0), 1550.0, 11, PeriodMode::Resolve)? {
        let fwhm = p.fwhm_ghz.map(|f| format!("{f:.1}")).unwrap_or_else(|e| e);
        println!("{:>9.1} {:>10.2} {:>10.4} {:>10}", p.pump_nm, p.signal_nm, p.poling_period_um.unwrap_or(f64::NAN), fwhm);
    }

    // With the grating fixed, the peak walks away from 1550 nm as the pump moves.
    let fixed = spec.with_poling_period(period)?;
    let points = tuning_curve(&fixed, (472.0, 474.0), 1550.0, 5, PeriodMode::Fixed)?;
    println!("\nfixed grating:");
    for p in points {
        let fwhm = p.fwhm_ghz.map(|f| format!("{f:.1} GHz")).unwrap_or_else(|e| e);
        println!("  pump {:.1} nm -> FWHM {fwhm}", p.pump_nm);
    }
    Ok(())
}
