//! Shared helpers for the integration and acceptance tests.
#![allow(dead_code)]

use pairsource::analysis::{count_coincidences, heralding, pair_generation_rate};
use pairsource::detection::{predict_rates, ArmBudget, CoincidenceWindow, DetectorModel};
use pairsource::sim::{simulate, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One simulated-versus-predicted comparison.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub observed: f64,
    pub expected: f64,
    pub sigma: f64,
}

impl Check {
    pub fn z(&self) -> f64 {
        (self.observed - self.expected) / self.sigma
    }
}

/// Window of 10·σ_total from the two detectors' jitter.
pub fn wide_window(cfg: &SimConfig) -> CoincidenceWindow {
    let st = cfg.signal.detector.jitter_fwhm_ps.hypot(cfg.idler.detector.jitter_fwhm_ps);
    CoincidenceWindow::new(10.0 * st, st).unwrap()
}

/// Simulates `cfg`, analyses channel 0 against 1 and compares singles,
/// coincidences, heralding and PGR with the analytic forward model using
/// Poisson standard deviations of the predicted counts.
pub fn oracle_checks(cfg: &SimConfig, win: &CoincidenceWindow) -> Vec<Check> {
    let stream = simulate(cfg).unwrap();
    let r = count_coincidences(&stream, 0, 1, win.window_ps.round() as u64).unwrap();
    let p = predict_rates(cfg.pgr_hz, &cfg.signal, &cfg.idler, win).unwrap();
    let t = cfg.duration_s;
    let (ss, si) = (p.singles_signal_hz * t, p.singles_idler_hz * t);
    let c_meas = p.measured_hz * t;
    let c_true = p.capture_fraction * p.true_hz * t;
    let h = heralding(&r).unwrap();
    let pgr = pair_generation_rate(&r).unwrap();
    let herald_s = c_true / si;
    let herald_i = c_true / ss;
    let pgr_pred = ss * si / c_true / t;
    vec![
        Check { name: "singles_signal", observed: r.singles_a as f64, expected: ss, sigma: ss.sqrt() },
        Check { name: "singles_idler", observed: r.singles_b as f64, expected: si, sigma: si.sqrt() },
        Check { name: "coincidences", observed: r.coincidences as f64, expected: c_meas, sigma: c_meas.sqrt() },
        Check {
            name: "eta_signal",
            observed: h.eta_signal,
            expected: herald_s,
            sigma: herald_s * (1.0 / c_meas + 1.0 / si).sqrt(),
        },
        Check {
            name: "eta_idler",
            observed: h.eta_idler,
            expected: herald_i,
            sigma: herald_i * (1.0 / c_meas + 1.0 / ss).sqrt(),
        },
        Check {
            name: "pgr",
            observed: pgr,
            expected: pgr_pred,
            sigma: pgr_pred * (1.0 / c_meas + 1.0 / ss + 1.0 / si).sqrt(),
        },
    ]
}

/// Randomized configurations for the oracle-equivalence suite.
///
/// One arm gets a long dead time and the other a short one: dead time in
/// both arms at once correlates the survival of partner photons (a pair
/// lost to one arm's dead time tends to follow a detected pair in the other
/// arm), which the independent-arm model ignores. The bias is of order
/// C_true·min(τ_s, τ_i), kept well below the statistical error here.
/// Afterpulsing is off for the same reason; its delay structure is not
/// Poisson.
pub fn random_oracle_configs(n: usize, seed: u64, events: f64) -> Vec<SimConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let pgr = rng.random_range(2e5..1e6);
            let arm = |long: bool, rng: &mut ChaCha8Rng| {
                let det = DetectorModel {
                    pde: 1.0,
                    dead_time_ns: if long { rng.random_range(20.0..200.0) } else { rng.random_range(0.0..5.0) },
                    dark_rate_hz: rng.random_range(0.0..5e4),
                    afterpulse_prob: 0.0,
                    afterpulse_tau_ns: 0.0,
                    jitter_fwhm_ps: rng.random_range(30.0..500.0),
                };
                ArmBudget::new(rng.random_range(0.05..0.3), det).unwrap()
            };
            let long_signal = rng.random_bool(0.5);
            let signal = arm(long_signal, &mut rng);
            let idler = arm(!long_signal, &mut rng);
            let rate = pgr * (signal.eta_static + idler.eta_static) + signal.detector.dark_rate_hz + idler.detector.dark_rate_hz;
            SimConfig::new(pgr, events / rate, 1000 + k as u64, signal, idler)
        })
        .collect()
}
