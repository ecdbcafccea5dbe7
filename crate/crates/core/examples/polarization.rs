//! Entangled-state model visibilities, and the same numbers recovered from
//! a simulated passive analysis module.
//!
//!     cargo run --release --example polarization

use pairsource::cli::pam_tables;
use pairsource::detection::{ArmBudget, DetectorModel};
use pairsource::polarization::{
    bootstrap_uncertainty, fidelity_bound, model_visibility, uncertainty, visibility, visibility_vs_phase, Basis,
    EntangledStateModel,
};
use pairsource::sim::{simulate, AnalyzerSettings, PolarizationSetup, SimConfig};

fn main() -> pairsource::Result<()> {
    let state = EntangledStateModel::new(0.0, 0.5, 0.051)?;
    let (hv, da) = (model_visibility(&state, Basis::HV), model_visibility(&state, Basis::DA));
    println!("model: V_HV {hv:.4}, V_DA {da:.4}, fidelity >= {:.4}", fidelity_bound(hv, da));

    for p in visibility_vs_phase(&state, &[0.0, 0.5, 1.0, std::f64::consts::FRAC_PI_2]) {
        println!("  phase {:.3} rad: V_DA {:.4}", p.phase_rad, p.v_da);
    }

    let det = DetectorModel { jitter_fwhm_ps: 100.0, dark_rate_hz: 500.0, ..DetectorModel::ideal(1.0) };
    let mut cfg = SimConfig::new(5e5, 1.0, 3, ArmBudget::new(0.2, det)?, ArmBudget::new(0.2, det)?);
    cfg.polarization = Some(PolarizationSetup { state, analyzer: AnalyzerSettings::Pam, drift: None });
    let stream = simulate(&cfg)?;

    let mut measured = Vec::new();
    for table in pam_tables(&stream, 1_500)? {
        let v = visibility(&table)?;
        let delta = uncertainty(&table)?;
        let boot = bootstrap_uncertainty(&table, 500, 1)?;
        println!("{}: counts {:?}, V {v:.4} +- {:.4} (bootstrap {boot:.4})", table.basis, table.counts, delta.std_err);
        measured.push(v);
    }
    println!("measured fidelity >= {:.4}", fidelity_bound(measured[0], measured[1]));
    Ok(())
}
