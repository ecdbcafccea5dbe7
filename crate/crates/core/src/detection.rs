//! Analytical forward model for singles and coincidence rates under
//! detector dead time, dark counts and afterpulsing.
//!
//! Per arm the pre-dead-time arrival rate is `pgr·η_static + dark_rate`.
//! Afterpulses add `afterpulse_prob` extra arrivals per accepted event, so
//! the total offered rate R and the accepted rate S = R/(1 + R·τ) are
//! solved together by fixed-point iteration. The non-paralyzable livetime
//! factor 1/(1 + R·τ) is η_dynamic.

use crate::error::{Error, Result};
use crate::units::FWHM_PER_SIGMA;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub pde: f64,
    /// Non-paralyzable dead time.
    pub dead_time_ns: f64,
    pub dark_rate_hz: f64,
    pub afterpulse_prob: f64,
    /// Mean delay of afterpulses measured from the end of the dead time.
    pub afterpulse_tau_ns: f64,
    /// Gaussian timing jitter, FWHM.
    pub jitter_fwhm_ps: f64,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be >= 0, got {v}")))
            }
        };
        prob("pde", self.pde)?;
        prob("afterpulse probability", self.afterpulse_prob)?;
        nonneg("dead time", self.dead_time_ns)?;
        nonneg("dark rate", self.dark_rate_hz)?;
        nonneg("afterpulse decay", self.afterpulse_tau_ns)?;
        nonneg("jitter", self.jitter_fwhm_ps)
    }

    /// A detector with no dead time, darks, afterpulsing or jitter.
    pub fn ideal(pde: f64) -> Self {
        DetectorModel {
            pde,
            dead_time_ns: 0.0,
            dark_rate_hz: 0.0,
            afterpulse_prob: 0.0,
            afterpulse_tau_ns: 0.0,
            jitter_fwhm_ps: 0.0,
        }
    }

    pub fn jitter_sigma_ps(&self) -> f64 {
        self.jitter_fwhm_ps / FWHM_PER_SIGMA
    }

    fn dead_time_s(&self) -> f64 {
        self.dead_time_ns * 1e-9
    }
}

/// Static efficiency (transmission × coupling × PDE) and the detector of
/// one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmBudget {
    pub eta_static: f64,
    pub detector: DetectorModel,
}

impl ArmBudget {
    pub fn new(eta_static: f64, detector: DetectorModel) -> Result<Self> {
        if !(eta_static > 0.0 && eta_static <= 1.0) {
            return Err(Error::domain(format!("static efficiency must lie in (0, 1], got {eta_static}")));
        }
        detector.validate()?;
        Ok(ArmBudget { eta_static, detector })
    }

    /// Budget built from the optical transmission of the arm and the
    /// detector's PDE.
    pub fn from_transmission(transmission: f64, detector: DetectorModel) -> Result<Self> {
        Self::new(transmission * detector.pde, detector)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceWindow {
    /// Full window width; coincidences satisfy |t_a − t_b| ≤ Δt/2.
    pub window_ps: f64,
    /// FWHM of the arrival-time difference distribution.
    pub sigma_total_ps: f64,
}

impl CoincidenceWindow {
    pub fn new(window_ps: f64, sigma_total_ps: f64) -> Result<Self> {
        if !(window_ps >= 0.0) || !(sigma_total_ps > 0.0) {
            return Err(Error::domain("coincidence window needs window >= 0 and sigma_total > 0"));
        }
        Ok(CoincidenceWindow { window_ps, sigma_total_ps })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePrediction {
    pub singles_signal_hz: f64,
    pub singles_idler_hz: f64,
    pub true_hz: f64,
    pub accidental_hz: f64,
    pub measured_hz: f64,
    pub capture_fraction: f64,
    pub herald_signal: f64,
    pub herald_idler: f64,
    pub eta_dynamic_signal: f64,
    pub eta_dynamic_idler: f64,
    /// What the PGR estimator S_s·S_i/C_true would return on these rates.
    pub pgr_estimate_hz: f64,
    /// Set when S·Δt > 0.1 on either arm.
    pub high_occupancy: bool,
}

const FIXED_POINT_MAX_ITER: usize = 100;
const FIXED_POINT_TOL: f64 = 1e-12;

/// Total offered rate R (arrivals plus afterpulses) for an arrival rate.
fn offered_rate(arrival_hz: f64, det: &DetectorModel) -> Result<f64> {
    let tau = det.dead_time_s();
    let p = det.afterpulse_prob;
    if p == 0.0 {
        return Ok(arrival_hz);
    }
    let mut r = arrival_hz;
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = arrival_hz + p * r / (1.0 + r * tau);
        if !next.is_finite() {
            break;
        }
        if (next - r).abs() <= FIXED_POINT_TOL * next.max(1.0) {
            return Ok(next);
        }
        r = next;
    }
    Err(Error::Solver(format!(
        "afterpulse fixed point did not converge in {FIXED_POINT_MAX_ITER} iterations \
         (arrival {arrival_hz} Hz, afterpulse probability {p}, dead time {} ns)",
        det.dead_time_ns
    )))
}

fn livetime(offered_hz: f64, det: &DetectorModel) -> f64 {
    1.0 / (1.0 + offered_hz * det.dead_time_s())
}

/// Fraction of arrivals that find the detector live, including the dead
/// time taken up by afterpulses.
pub fn dynamic_efficiency(rate_hz: f64, det: &DetectorModel) -> Result<f64> {
    if !(rate_hz >= 0.0) {
        return Err(Error::domain(format!("rate must be >= 0, got {rate_hz}")));
    }
    Ok(livetime(offered_rate(rate_hz, det)?, det))
}

/// Gaussian capture fraction F = erf(√ln2 · Δt/σ_total).
pub fn capture_fraction(win: &CoincidenceWindow) -> f64 {
    libm::erf(std::f64::consts::LN_2.sqrt() * win.window_ps / win.sigma_total_ps)
}

/// Quadrature sum of jitter contributions (all FWHM, ps).
pub fn combine_jitter(components_ps: &[f64]) -> Result<f64> {
    if components_ps.is_empty() {
        return Err(Error::domain("no jitter components"));
    }
    if let Some(bad) = components_ps.iter().find(|c| !(**c > 0.0)) {
        return Err(Error::domain(format!("jitter components must be > 0, got {bad}")));
    }
    Ok(components_ps.iter().map(|c| c * c).sum::<f64>().sqrt())
}

struct ArmRates {
    singles_hz: f64,
    eta_dynamic: f64,
}

fn arm_rates(pgr_hz: f64, arm: &ArmBudget) -> Result<ArmRates> {
    let arrival = pgr_hz * arm.eta_static + arm.detector.dark_rate_hz;
    let offered = offered_rate(arrival, &arm.detector)?;
    let eta_dynamic = livetime(offered, &arm.detector);
    Ok(ArmRates { singles_hz: offered * eta_dynamic, eta_dynamic })
}

/// Forward model: singles, true/accidental/measured coincidences and
/// heralding efficiencies for a pair generation rate.
pub fn predict_rates(pgr_hz: f64, signal: &ArmBudget, idler: &ArmBudget, win: &CoincidenceWindow) -> Result<RatePrediction> {
    if !(pgr_hz >= 0.0) {
        return Err(Error::domain(format!("pair rate must be >= 0, got {pgr_hz}")));
    }
    let s = arm_rates(pgr_hz, signal)?;
    let i = arm_rates(pgr_hz, idler)?;

    let eta_eff_s = signal.eta_static * s.eta_dynamic;
    let eta_eff_i = idler.eta_static * i.eta_dynamic;
    let true_hz = pgr_hz * eta_eff_s * eta_eff_i;
    let capture = capture_fraction(win);
    let window_s = win.window_ps * 1e-12;
    let accidental_hz = s.singles_hz * i.singles_hz * window_s;
    let measured_hz = capture * true_hz + accidental_hz;

    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(RatePrediction {
        singles_signal_hz: s.singles_hz,
        singles_idler_hz: i.singles_hz,
        true_hz,
        accidental_hz,
        measured_hz,
        capture_fraction: capture,
        herald_signal: ratio(true_hz, i.singles_hz),
        herald_idler: ratio(true_hz, s.singles_hz),
        eta_dynamic_signal: s.eta_dynamic,
        eta_dynamic_idler: i.eta_dynamic,
        pgr_estimate_hz: if true_hz > 0.0 { s.singles_hz * i.singles_hz / true_hz } else { f64::NAN },
        high_occupancy: s.singles_hz * window_s > 0.1 || i.singles_hz * window_s > 0.1,
    })
}
