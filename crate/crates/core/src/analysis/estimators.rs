//! Heralding efficiency, pair generation rate and brightness estimators.

use crate::analysis::CoincidenceResult;
use crate::error::{Error, Result};

/// Channel a is taken as the signal arm, channel b as the idler arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heralding {
    /// C_true / S_idler: signal detected given an idler detection.
    pub eta_signal: f64,
    /// C_true / S_signal: idler detected given a signal detection.
    pub eta_idler: f64,
}

pub fn heralding(result: &CoincidenceResult) -> Result<Heralding> {
    if result.singles_a == 0 || result.singles_b == 0 {
        return Err(Error::analysis("heralding needs nonzero singles in both arms"));
    }
    Ok(Heralding {
        eta_signal: result.true_estimate / result.singles_b as f64,
        eta_idler: result.true_estimate / result.singles_a as f64,
    })
}

/// S_s · S_i / C_true, in Hz.
pub fn pair_generation_rate(result: &CoincidenceResult) -> Result<f64> {
    if !(result.true_estimate > 0.0) {
        return Err(Error::analysis("insufficient true coincidences"));
    }
    Ok(result.singles_rate_a() * result.singles_rate_b() / result.true_rate())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrightnessFit {
    /// (pump power mW, pair rate Hz)
    pub points: Vec<(f64, f64)>,
    /// pairs/s/mW
    pub slope: f64,
    pub intercept: f64,
    /// Zero for two points.
    pub slope_stderr: f64,
}

/// Ordinary least squares of rate against pump power.
pub fn brightness_fit(points: &[(f64, f64)]) -> Result<BrightnessFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::analysis("brightness fit needs at least 2 points"));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 1e-12 * (1.0 + mx * mx) * nf) {
        return Err(Error::analysis("brightness fit needs at least 2 distinct pump powers"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(BrightnessFit { points: points.to_vec(), slope, intercept, slope_stderr })
}

/// pairs/s/mW/GHz
pub fn spectral_brightness(fit: &BrightnessFit, fwhm_ghz: f64) -> Result<f64> {
    if !(fwhm_ghz > 0.0) {
        return Err(Error::domain(format!("bandwidth must be > 0, got {fwhm_ghz} GHz")));
    }
    Ok(fit.slope / fwhm_ghz)
}
