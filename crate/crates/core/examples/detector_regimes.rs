//! Heralding efficiency against pump power for three detector models:
//! dead time and afterpulsing set where each one saturates.
//!
//!     cargo run --example detector_regimes

use pairsource::detection::{dynamic_efficiency, predict_rates, ArmBudget, CoincidenceWindow, DetectorModel};

fn main() -> pairsource::Result<()> {
    let base = DetectorModel {
        pde: 0.65,
        dead_time_ns: 22.0,
        dark_rate_hz: 1e5,
        afterpulse_prob: 0.0,
        afterpulse_tau_ns: 0.0,
        jitter_fwhm_ps: 350.0,
    };
    let idlers = [
        ("SNSPD", DetectorModel { pde: 0.35, dead_time_ns: 25.0, dark_rate_hz: 100.0, jitter_fwhm_ps: 50.0, ..base }),
        (
            "gated InGaAs",
            DetectorModel {
                pde: 0.20,
                dead_time_ns: 20_000.0,
                dark_rate_hz: 1_000.0,
                afterpulse_prob: 0.05,
                afterpulse_tau_ns: 1_000.0,
                jitter_fwhm_ps: 200.0,
            },
        ),
        ("lossless idler detector", DetectorModel { jitter_fwhm_ps: 50.0, ..DetectorModel::ideal(0.35) }),
    ];
    let signal = ArmBudget::from_transmission(0.52, base)?;
    for (name, det) in idlers {
        let idler = ArmBudget::from_transmission(0.52, det)?;
        let sigma = base.jitter_fwhm_ps.hypot(det.jitter_fwhm_ps);
        let win = CoincidenceWindow::new(10.0 * sigma, sigma)?;
        println!("{name}:");
        for mw in [1.0, 4.0, 15.0, 30.0] {
            let pgr = 5.61e5 * mw;
            let r = predict_rates(pgr, &signal, &idler, &win)?;
            println!(
                "  {mw:>4} mW  idler livetime {:.3}  signal-arm heralding {:.2} %",
                dynamic_efficiency(pgr * idler.eta_static + det.dark_rate_hz, &det)?,
                100.0 * r.herald_idler
            );
        }
    }
    Ok(())
}
