//! Forward model of singles, coincidences and heralding efficiency across
//! pump power for a Si SPAD / SNSPD detector pair.
//!
//!     cargo run --example predict_rates

use pairsource::detection::{combine_jitter, predict_rates, ArmBudget, CoincidenceWindow, DetectorModel};

fn main() -> pairsource::Result<()> {
    let spad = DetectorModel {
        pde: 0.65,
        dead_time_ns: 22.0,
        dark_rate_hz: 1e5,
        afterpulse_prob: 0.0,
        afterpulse_tau_ns: 0.0,
        jitter_fwhm_ps: 350.0,
    };
    let snspd = DetectorModel { pde: 0.35, dead_time_ns: 25.0, dark_rate_hz: 100.0, jitter_fwhm_ps: 50.0, ..spad };
    let signal = ArmBudget::from_transmission(0.52, spad)?;
    let idler = ArmBudget::from_transmission(0.52, snspd)?;
    let sigma = combine_jitter(&[spad.jitter_fwhm_ps, snspd.jitter_fwhm_ps])?;
    let win = CoincidenceWindow::new(10.0 * sigma, sigma)?;
    println!("window {:.0} ps (sigma_total {sigma:.0} ps)\n", win.window_ps);

    println!("{:>6} {:>12} {:>12} {:>10} {:>10} {:>10}", "mW", "S_s Hz", "S_i Hz", "C Hz", "eta_s %", "eta_i %");
    for mw in [1.0, 2.0, 4.0, 8.0, 15.0, 30.0] {
        let r = predict_rates(5.61e5 * mw, &signal, &idler, &win)?;
        println!(
            "{mw:>6} {:>12.4e} {:>12.4e} {:>10.4e} {:>10.2} {:>10.2}",
            r.singles_signal_hz,
            r.singles_idler_hz,
            r.measured_hz,
            100.0 * r.herald_signal,
            100.0 * r.herald_idler
        );
    }
    Ok(())
}
