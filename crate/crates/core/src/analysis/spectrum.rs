//! Filter-scan convolution and Gaussian deconvolution of linewidths.

use crate::error::{Error, Result};
use crate::phasematch::SpectralLine;
use crate::units::FWHM_PER_SIGMA;

/// √(measured² − filter²)
pub fn deconvolve_fwhm(measured_ghz: f64, filter_ghz: f64) -> Result<f64> {
    if !(filter_ghz > 0.0) {
        return Err(Error::domain(format!("filter FWHM must be > 0, got {filter_ghz} GHz")));
    }
    if !(measured_ghz > filter_ghz) {
        return Err(Error::analysis(format!(
            "filter-limited measurement: measured {measured_ghz} GHz does not exceed filter {filter_ghz} GHz"
        )));
    }
    Ok(((measured_ghz - filter_ghz) * (measured_ghz + filter_ghz)).sqrt())
}

/// √(a² + b²), the inverse of `deconvolve_fwhm`.
pub fn quadrature_add(a_ghz: f64, b_ghz: f64) -> f64 {
    a_ghz.hypot(b_ghz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterScan {
    pub line: SpectralLine,
    /// Centre spacing exceeds a quarter of the filter FWHM.
    pub undersampled: bool,
}

/// Transmitted power of `line` through a Gaussian filter of the given FWHM
/// at each centre frequency, by trapezoidal integration over the line's
/// samples.
pub fn filter_scan(line: &SpectralLine, filter_fwhm_ghz: f64, centers_ghz: &[f64]) -> Result<FilterScan> {
    if !(filter_fwhm_ghz > 0.0) {
        return Err(Error::domain("filter FWHM must be > 0"));
    }
    if centers_ghz.len() < 3 {
        return Err(Error::domain("filter scan needs at least 3 centres"));
    }
    if line.samples.len() < 2 {
        return Err(Error::domain("spectral line needs at least 2 samples"));
    }
    let mut centers = centers_ghz.to_vec();
    centers.sort_by(f64::total_cmp);
    let undersampled = centers.windows(2).any(|w| w[1] - w[0] > filter_fwhm_ghz / 4.0);

    let sigma = filter_fwhm_ghz / FWHM_PER_SIGMA;
    let gauss = |d: f64| (-0.5 * (d / sigma).powi(2)).exp();
    // Beyond 8σ the filter weight is below 1e-13 of its peak.
    let reach = 8.0 * sigma;
    let samples = centers
        .iter()
        .map(|&c| {
            let lo = line.samples.partition_point(|s| s.0 < c - reach).saturating_sub(1);
            let hi = (line.samples.partition_point(|s| s.0 <= c + reach) + 1).min(line.samples.len());
            let power: f64 = line.samples[lo..hi]
                .windows(2)
                .map(|w| {
                    let (x0, y0) = w[0];
                    let (x1, y1) = w[1];
                    0.5 * (x1 - x0) * (y0 * gauss(x0 - c) + y1 * gauss(x1 - c))
                })
                .sum();
            (c, power)
        })
        .collect();
    Ok(FilterScan { line: SpectralLine::from_samples(samples)?, undersampled })
}
