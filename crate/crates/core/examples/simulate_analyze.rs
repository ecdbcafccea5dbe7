//! Simulates a timestamp stream, counts coincidences and recovers the pair
//! generation rate and heralding efficiencies.
//!
//!     cargo run --release --example simulate_analyze

use pairsource::analysis::{brightness_fit, count_coincidences, heralding, pair_generation_rate, window_sweep};
use pairsource::detection::{ArmBudget, DetectorModel};
use pairsource::sim::{simulate, SimConfig};

fn main() -> pairsource::Result<()> {
    let det = DetectorModel { jitter_fwhm_ps: 50.0, dark_rate_hz: 1e3, dead_time_ns: 20.0, ..DetectorModel::ideal(1.0) };
    let signal = ArmBudget::new(0.1, det)?;
    let idler = ArmBudget::new(0.2, det)?;

    let mut points = Vec::new();
    for (k, mw) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        let cfg = SimConfig::new(1e6 * mw, 0.5, 7 + k as u64, signal, idler);
        let stream = simulate(&cfg)?;
        let r = count_coincidences(&stream, 0, 1, 1_000)?;
        let h = heralding(&r)?;
        let pgr = pair_generation_rate(&r)?;
        println!(
            "{mw} mW: {} events, C {} (acc {:.1}), eta_s {:.4}, eta_i {:.4}, PGR {pgr:.4e} Hz",
            stream.events.len(),
            r.coincidences,
            r.accidentals_estimate,
            h.eta_signal,
            h.eta_idler
        );
        points.push((mw, pgr));

        if k == 0 {
            for w in window_sweep(&stream, 0, 1, &[0, 25, 50, 100, 200, 1000])? {
                println!("    window {:>5} ps: {} coincidences", w.window_ps, w.coincidences);
            }
        }
    }
    let fit = brightness_fit(&points)?;
    println!("brightness {:.4e} +- {:.1e} pairs/s/mW", fit.slope, fit.slope_stderr);
    Ok(())
}
