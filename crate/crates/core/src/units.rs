//! Physical constants and unit conversions shared across modules.
//!
//! Wavelengths cross public interfaces in nanometres and are converted to
//! micrometres internally, which is the native unit of Sellmeier fits.

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// FWHM of a Gaussian divided by its standard deviation, `2·sqrt(2·ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub const PS_PER_S: f64 = 1e12;
pub const PS_PER_NS: f64 = 1e3;

#[inline]
pub fn nm_to_um(nm: f64) -> f64 {
    nm * 1e-3
}

#[inline]
pub fn um_to_nm(um: f64) -> f64 {
    um * 1e3
}

/// Vacuum wavelength in nm to optical frequency in GHz.
#[inline]
pub fn nm_to_ghz(nm: f64) -> f64 {
    SPEED_OF_LIGHT / nm
}

/// Optical frequency in GHz to vacuum wavelength in nm.
#[inline]
pub fn ghz_to_nm(ghz: f64) -> f64 {
    SPEED_OF_LIGHT / ghz
}

/// Seconds to the 1 ps integer grid used by timestamp streams.
#[inline]
pub fn s_to_ps(s: f64) -> u64 {
    (s * PS_PER_S).round() as u64
}

#[inline]
pub fn ns_to_ps(ns: f64) -> u64 {
    (ns * PS_PER_NS).round() as u64
}
