//! Emission spectrum measured through a scanned 125 GHz Gaussian filter,
//! and the quadrature deconvolution used to recover the linewidth.
//!
//!     cargo run --example filter_deconvolution

use pairsource::analysis::{deconvolve_fwhm, filter_scan, quadrature_add};
use pairsource::phasematch::{emission_bandwidth, CrystalSpec, SpectralLine};

fn main() -> pairsource::Result<()> {
    let spec = CrystalSpec::ppktp_10mm(40.0);
    let fwhm = emission_bandwidth(&spec, 473.0, 1550.0)?;
    let filter = 125.0;

    let line = SpectralLine::sinc2(0.0, fwhm, 3_000.0, 6_001)?;
    let centers: Vec<f64> = (-400..=400).map(|k| 2.0 * k as f64).collect();
    let scan = filter_scan(&line, filter, &centers)?;
    let measured = scan.line.fwhm_ghz;
    println!("emission FWHM        {fwhm:.2} GHz");
    println!("scanned FWHM         {measured:.2} GHz (undersampled: {})", scan.undersampled);
    println!("Gaussian prediction  {:.2} GHz", quadrature_add(fwhm, filter));
    println!("deconvolved          {:.2} GHz", deconvolve_fwhm(measured, filter)?);

    // sinc² has heavier wings than a Gaussian, so the quadrature rule only
    // approximately undoes the scan.
    match deconvolve_fwhm(100.0, filter) {
        Ok(v) => println!("unexpected {v}"),
        Err(e) => println!("\n100 GHz through a 125 GHz filter: {e}"),
    }
    Ok(())
}
