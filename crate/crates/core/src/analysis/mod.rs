//! Estimators over timestamp streams and measured spectra.

mod coincidence;
mod estimators;
mod spectrum;

pub use coincidence::{
    count_coincidences, count_coincidences_chunked, count_coincidences_with, window_sweep, AccidentalMode, CoincidenceCounter,
    CoincidenceResult,
};
pub use estimators::{brightness_fit, heralding, pair_generation_rate, spectral_brightness, BrightnessFit, Heralding};
pub use spectrum::{deconvolve_fwhm, filter_scan, quadrature_add, FilterScan};
