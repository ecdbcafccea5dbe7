mod common;

use pairsource::analysis::{
    count_coincidences, count_coincidences_with, heralding, pair_generation_rate, window_sweep, AccidentalMode,
};
use pairsource::detection::{capture_fraction, dynamic_efficiency, predict_rates, ArmBudget, CoincidenceWindow, DetectorModel};
use pairsource::sim::{simulate, simulate_with_stats, SimConfig};
use pairsource::stream::TimestampStream;
use proptest::prelude::*;

fn det(jitter_ps: f64) -> DetectorModel {
    DetectorModel { jitter_fwhm_ps: jitter_ps, ..DetectorModel::ideal(1.0) }
}

fn arm(eta: f64, d: DetectorModel) -> ArmBudget {
    ArmBudget::new(eta, d).unwrap()
}

#[test]
fn darks_only_accidentals_follow_singles_product() {
    let dark = DetectorModel { dark_rate_hz: 1e6, ..det(100.0) };
    let cfg = SimConfig::new(0.0, 1.0, 11, arm(0.5, dark), arm(0.5, dark));
    let s = simulate(&cfg).unwrap();
    let w = 2_000;
    let r = count_coincidences(&s, 0, 1, w).unwrap();
    let expected = r.singles_a as f64 * r.singles_b as f64 * w as f64 * 1e-12;
    let z = (r.coincidences as f64 - expected) / expected.sqrt();
    assert!(z.abs() <= 3.0, "observed {} expected {expected:.1} z {z:.2}", r.coincidences);
    assert!(r.true_estimate.abs() <= 3.0 * expected.sqrt());
}

#[test]
fn delayed_and_singles_accidentals_agree() {
    let noisy = DetectorModel { dark_rate_hz: 5e5, ..det(300.0) };
    let cfg = SimConfig::new(5e5, 1.0, 12, arm(0.2, noisy), arm(0.2, noisy));
    let s = simulate(&cfg).unwrap();
    let w = 4_000;
    let singles = count_coincidences(&s, 0, 1, w).unwrap();
    let delayed = count_coincidences_with(&s, 0, 1, w, AccidentalMode::Delayed { offset_ps: 200_000 }).unwrap();
    assert_eq!(singles.coincidences, delayed.coincidences);
    let sigma = delayed.accidentals_estimate.sqrt();
    let z = (delayed.accidentals_estimate - singles.accidentals_estimate) / sigma;
    assert!(z.abs() <= 3.0, "delayed {} singles {} z {z:.2}", delayed.accidentals_estimate, singles.accidentals_estimate);
}

#[test]
fn estimators_recover_the_configured_source() {
    let cfg = SimConfig::new(1e6, 0.5, 13, arm(0.1, det(50.0)), arm(0.2, det(50.0)));
    let s = simulate(&cfg).unwrap();
    let r = count_coincidences(&s, 0, 1, 1_000).unwrap();
    let c = r.coincidences as f64;
    let true_rate = r.true_rate();
    let z_true = (true_rate - 2e4) / (c.sqrt() / 0.5);
    assert!(z_true.abs() <= 3.0, "true rate {true_rate} z {z_true:.2}");

    let pgr = pair_generation_rate(&r).unwrap();
    let sigma = 1e6 * (1.0 / c + 1.0 / r.singles_a as f64 + 1.0 / r.singles_b as f64).sqrt();
    assert!(((pgr - 1e6) / sigma).abs() <= 3.0, "pgr {pgr}");

    let h = heralding(&r).unwrap();
    let z_s = (h.eta_signal - 0.1) / (0.1 * (1.0 / c).sqrt());
    let z_i = (h.eta_idler - 0.2) / (0.2 * (1.0 / c).sqrt());
    assert!(z_s.abs() <= 3.0 && z_i.abs() <= 3.0, "heralding {h:?}");
}

#[test]
fn capture_fraction_tracks_the_window() {
    let cfg = SimConfig::new(1e6, 0.5, 14, arm(0.2, det(300.0)), arm(0.2, det(300.0)));
    let sigma_total = 300f64.hypot(300.0);
    let s = simulate(&cfg).unwrap();
    let windows = [0, 100, 200, 400, 800, 1600, 8_000];
    let sweep = window_sweep(&s, 0, 1, &windows).unwrap();
    assert_eq!(sweep[0].coincidences, 0);
    let wide = sweep.last().unwrap();
    let full = wide.true_estimate;
    for r in &sweep[1..sweep.len() - 1] {
        let f = capture_fraction(&CoincidenceWindow::new(r.window_ps as f64, sigma_total).unwrap());
        let observed = r.true_estimate / full;
        // Binomial capture noise plus the accidental fluctuations in both windows.
        let sigma = (f * (1.0 - f) / full).sqrt() + (r.accidentals_estimate + wide.accidentals_estimate).sqrt() / full;
        assert!(
            ((observed - f) / sigma).abs() <= 3.0,
            "window {} ps: captured {observed:.4}, model {f:.4}",
            r.window_ps
        );
    }
}

#[test]
fn estimator_error_shrinks_as_inverse_root_duration() {
    let base = SimConfig::new(1e5, 0.05, 0, arm(0.2, det(50.0)), arm(0.2, det(50.0)));
    let rms = |duration_s: f64| {
        let k = 30;
        let sq: f64 = (0..k)
            .map(|rep| {
                let cfg = SimConfig { duration_s, seed: 500 + rep, ..base.clone() };
                let r = count_coincidences(&simulate(&cfg).unwrap(), 0, 1, 1_000).unwrap();
                (heralding(&r).unwrap().eta_idler - 0.2).powi(2)
            })
            .sum();
        (sq / k as f64).sqrt()
    };
    let ratio = rms(0.05) / rms(0.8);
    assert!((2.0..=6.0).contains(&ratio), "error ratio {ratio:.2} over a 16x duration change");
}

#[test]
fn livetime_matches_non_paralyzable_model() {
    for (rate, dead_ns) in [(1e5, 100.0), (1e6, 50.0), (5e6, 100.0)] {
        let d = DetectorModel { dead_time_ns: dead_ns, ..det(50.0) };
        let cfg = SimConfig::new(rate, 0.2, 15, arm(1.0, d), arm(1.0, det(50.0)));
        let (_, stats) = simulate_with_stats(&cfg).unwrap();
        let model = dynamic_efficiency(rate, &d).unwrap();
        let observed = stats[0].livetime();
        assert!((observed / model - 1.0).abs() < 0.01, "rate {rate}: {observed} vs {model}");
    }
}

#[test]
fn afterpulse_singles_follow_the_fixed_point_model() {
    let d = DetectorModel {
        dead_time_ns: 100.0,
        afterpulse_prob: 0.1,
        afterpulse_tau_ns: 500.0,
        ..det(50.0)
    };
    let cfg = SimConfig::new(1e6, 0.5, 16, arm(0.5, d), arm(0.5, det(50.0)));
    let s = simulate(&cfg).unwrap();
    let win = CoincidenceWindow::new(1000.0, 70.0).unwrap();
    let p = predict_rates(1e6, &cfg.signal, &cfg.idler, &win).unwrap();
    let observed = s.count(0) as f64 / cfg.duration_s;
    // The model ignores the afterpulse delay distribution; a few percent is expected.
    assert!((observed / p.singles_signal_hz - 1.0).abs() < 0.02, "{observed} vs {}", p.singles_signal_hz);
}

#[test]
fn randomized_configs_match_the_forward_model() {
    for cfg in common::random_oracle_configs(4, 77, 3e5) {
        let win = common::wide_window(&cfg);
        for c in common::oracle_checks(&cfg, &win) {
            assert!(c.z().abs() <= 3.5, "{}: observed {} expected {} z {:.2}", c.name, c.observed, c.expected, c.z());
        }
    }
}

#[test]
fn saved_streams_reproduce_the_analysis() {
    let noisy = DetectorModel { dark_rate_hz: 1e4, dead_time_ns: 20.0, ..det(200.0) };
    let cfg = SimConfig::new(2e5, 0.2, 17, arm(0.2, noisy), arm(0.3, noisy));
    let a = simulate(&cfg).unwrap();
    assert_eq!(a, simulate(&cfg).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let reference = count_coincidences(&a, 0, 1, 2_000).unwrap();
    for name in ["s.qtt", "s.txt"] {
        let path = dir.path().join(name);
        a.save(&path).unwrap();
        let b = TimestampStream::load(&path).unwrap();
        assert_eq!(count_coincidences(&b, 0, 1, 2_000).unwrap(), reference, "{name}");
    }
    let other = SimConfig { seed: 18, ..cfg.clone() };
    assert_ne!(simulate(&other).unwrap().events, a.events);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dead_time_separates_every_detection(
        dead_ns in 1.0f64..500.0,
        rate in 1e4f64..5e6,
        p_ap in 0.0f64..0.3,
        tau_ns in 0.0f64..300.0,
        dark in 0.0f64..1e6,
        seed in any::<u64>(),
    ) {
        let d = DetectorModel {
            dead_time_ns: dead_ns,
            dark_rate_hz: dark,
            afterpulse_prob: p_ap,
            afterpulse_tau_ns: tau_ns,
            ..det(100.0)
        };
        let cfg = SimConfig::new(rate, 0.01, seed, arm(0.5, d), arm(0.5, d));
        let s = simulate(&cfg).unwrap();
        let dead_ps = pairsource::units::ns_to_ps(dead_ns);
        for ch in [0u8, 1] {
            let times: Vec<u64> = s.times(ch).collect();
            for pair in times.windows(2) {
                prop_assert!(pair[1] - pair[0] >= dead_ps, "gap {} < {dead_ps}", pair[1] - pair[0]);
            }
        }
    }
}
