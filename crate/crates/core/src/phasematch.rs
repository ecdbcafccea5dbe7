//! Collinear type-0 quasi-phase matching: mismatch, poling-period design,
//! the sinc² joint spectral intensity and its FWHM.
//!
//! Spectra are expressed against idler optical frequency in GHz. The pump
//! is monochromatic, so the signal frequency follows from energy
//! conservation at every idler frequency.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::dispersion::DispersionTable;
use crate::error::{Error, Result};
use crate::units::{ghz_to_nm, nm_to_ghz};

/// Half-width of the sinc² main lobe at half maximum: sinc²(x) = 1/2.
pub const SINC2_HALF_MAX_ARG: f64 = 1.391_557_378_251_510_2;

#[derive(Debug, Clone)]
pub struct CrystalSpec {
    pub dispersion: Arc<DispersionTable>,
    pub length_mm: f64,
    /// `None` means an unpoled crystal: the grating term is omitted.
    pub poling_period_um: Option<f64>,
    pub temperature_c: f64,
    /// Informational only.
    pub aperture_mm: (f64, f64),
}

impl CrystalSpec {
    pub fn new(dispersion: Arc<DispersionTable>, length_mm: f64, temperature_c: f64) -> Result<Self> {
        if !(length_mm > 0.0 && length_mm.is_finite()) {
            return Err(Error::domain(format!("crystal length must be > 0, got {length_mm} mm")));
        }
        Ok(CrystalSpec {
            dispersion,
            length_mm,
            poling_period_um: None,
            temperature_c,
            aperture_mm: (1.0, 1.0),
        })
    }

    /// 10 mm ppKTP (z axis) with 1 × 1 mm² aperture at the given temperature.
    pub fn ppktp_10mm(temperature_c: f64) -> Self {
        CrystalSpec::new(DispersionTable::ktp_z(), 10.0, temperature_c).expect("valid length")
    }

    pub fn with_poling_period(mut self, period_um: f64) -> Result<Self> {
        if !(period_um > 0.0 && period_um.is_finite()) {
            return Err(Error::domain(format!("poling period must be > 0, got {period_um} um")));
        }
        self.poling_period_um = Some(period_um);
        Ok(self)
    }

    pub fn with_aperture(mut self, w_mm: f64, h_mm: f64) -> Result<Self> {
        if !(w_mm > 0.0 && h_mm > 0.0) {
            return Err(Error::domain("aperture dimensions must be positive"));
        }
        self.aperture_mm = (w_mm, h_mm);
        Ok(self)
    }

    pub fn length_um(&self) -> f64 {
        self.length_mm * 1e3
    }
}

/// Pump, signal and idler vacuum wavelengths (nm); signal is the shorter
/// daughter by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdcTriple {
    pub pump_nm: f64,
    pub signal_nm: f64,
    pub idler_nm: f64,
}

impl SpdcTriple {
    pub fn new(pump_nm: f64, signal_nm: f64, idler_nm: f64) -> Result<Self> {
        let lhs = 1.0 / pump_nm;
        let rhs = 1.0 / signal_nm + 1.0 / idler_nm;
        if !((lhs - rhs).abs() <= 1e-9 * lhs) {
            return Err(Error::domain(format!(
                "energy not conserved: 1/{pump_nm} != 1/{signal_nm} + 1/{idler_nm}"
            )));
        }
        if signal_nm > idler_nm {
            return Err(Error::domain("signal wavelength must not exceed idler wavelength"));
        }
        Ok(SpdcTriple { pump_nm, signal_nm, idler_nm })
    }

    /// Completes a triple from the pump and one daughter wavelength.
    pub fn from_pump_and(pump_nm: f64, daughter_nm: f64) -> Result<Self> {
        let other = conjugate_wavelength(pump_nm, daughter_nm)?;
        let (signal_nm, idler_nm) = if other <= daughter_nm {
            (other, daughter_nm)
        } else {
            (daughter_nm, other)
        };
        Ok(SpdcTriple { pump_nm, signal_nm, idler_nm })
    }
}

/// A sampled emission (or measured) spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLine {
    pub center_ghz: f64,
    pub fwhm_ghz: f64,
    /// (frequency GHz, intensity), sorted by frequency, peak 1.
    pub samples: Vec<(f64, f64)>,
}

impl SpectralLine {
    /// Normalises and sorts raw samples, measuring centre and FWHM by
    /// linear interpolation of the half-maximum crossings.
    pub fn from_samples(mut samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::analysis("spectral line has no samples"));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let peak = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        if !(peak > 0.0) {
            return Err(Error::analysis("spectral line has no positive intensity"));
        }
        for s in &mut samples {
            s.1 /= peak;
        }
        let (center_ghz, fwhm_ghz) = sampled_fwhm(&samples).ok_or_else(|| {
            Error::analysis("half-maximum crossings not contained in the sampled range")
        })?;
        Ok(SpectralLine { center_ghz, fwhm_ghz, samples })
    }

    /// Ideal sinc² line of the given FWHM, sampled uniformly over
    /// `center ± half_span`.
    pub fn sinc2(center_ghz: f64, fwhm_ghz: f64, half_span_ghz: f64, n: usize) -> Result<Self> {
        if !(fwhm_ghz > 0.0) || n < 3 || !(half_span_ghz > fwhm_ghz / 2.0) {
            return Err(Error::domain("sinc2 line needs fwhm > 0, span > fwhm/2 and n >= 3"));
        }
        let scale = 2.0 * SINC2_HALF_MAX_ARG / fwhm_ghz;
        let step = 2.0 * half_span_ghz / (n - 1) as f64;
        let samples = (0..n)
            .map(|i| {
                let nu = center_ghz - half_span_ghz + i as f64 * step;
                (nu, sinc2((nu - center_ghz) * scale))
            })
            .collect();
        Ok(SpectralLine { center_ghz, fwhm_ghz, samples })
    }
}

/// Peak location and interpolated FWHM of normalised, sorted samples.
pub(crate) fn sampled_fwhm(samples: &[(f64, f64)]) -> Option<(f64, f64)> {
    let (imax, _) = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
    let peak = samples[imax].1;
    let half = peak / 2.0;
    let lerp = |a: (f64, f64), b: (f64, f64)| a.0 + (half - a.1) * (b.0 - a.0) / (b.1 - a.1);
    let right = (imax..samples.len() - 1)
        .find(|&i| samples[i + 1].1 < half)
        .map(|i| lerp(samples[i], samples[i + 1]))?;
    let left = (1..=imax)
        .rev()
        .find(|&i| samples[i - 1].1 < half)
        .map(|i| lerp(samples[i - 1], samples[i]))?;
    Some((samples[imax].0, right - left))
}

pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[inline]
pub fn sinc2(x: f64) -> f64 {
    let s = sinc(x);
    s * s
}

/// Wavelength completing energy conservation: 1/λp = 1/λ + 1/λ_fixed.
pub fn conjugate_wavelength(pump_nm: f64, fixed_nm: f64) -> Result<f64> {
    if !(pump_nm > 0.0) || !(fixed_nm > pump_nm) || !fixed_nm.is_finite() {
        return Err(Error::domain(format!(
            "no physical daughter for pump {pump_nm} nm and partner {fixed_nm} nm (need partner > pump > 0)"
        )));
    }
    Ok(1.0 / (1.0 / pump_nm - 1.0 / fixed_nm))
}

fn bulk_mismatch(spec: &CrystalSpec, triple: &SpdcTriple) -> Result<f64> {
    let d = &spec.dispersion;
    let t = spec.temperature_c;
    Ok(d.wave_number(triple.pump_nm, t)? - d.wave_number(triple.signal_nm, t)? - d.wave_number(triple.idler_nm, t)?)
}

/// Δk = k_p − k_s − k_i − 2π/Λ in rad/µm.
pub fn phase_mismatch(spec: &CrystalSpec, triple: &SpdcTriple) -> Result<f64> {
    let bulk = bulk_mismatch(spec, triple)?;
    Ok(match spec.poling_period_um {
        Some(period) => bulk - 2.0 * PI / period,
        None => bulk,
    })
}

/// First-order poling period (µm) that zeroes Δk for `triple`. Any period
/// already set on `spec` is ignored.
pub fn solve_poling_period(spec: &CrystalSpec, triple: &SpdcTriple) -> Result<f64> {
    let bulk = bulk_mismatch(spec, triple)?;
    // Mismatch at rounding level relative to k_p counts as zero.
    let k_pump = spec.dispersion.wave_number(triple.pump_nm, spec.temperature_c)?;
    if !(bulk > 1e-12 * k_pump) {
        return Err(Error::Solver(format!(
            "no first-order QPM solution: bulk mismatch {bulk:.6e} rad/um is not positive"
        )));
    }
    Ok(2.0 * PI / bulk)
}

/// Idler-frequency view of one crystal and pump.
struct IdlerScan<'a> {
    spec: &'a CrystalSpec,
    pump_nm: f64,
    pump_ghz: f64,
}

impl<'a> IdlerScan<'a> {
    fn new(spec: &'a CrystalSpec, pump_nm: f64) -> Self {
        IdlerScan { spec, pump_nm, pump_ghz: nm_to_ghz(pump_nm) }
    }

    fn mismatch(&self, idler_ghz: f64) -> Result<f64> {
        let signal_ghz = self.pump_ghz - idler_ghz;
        if !(signal_ghz > 0.0) || !(idler_ghz > 0.0) {
            return Err(Error::domain("idler frequency outside (0, pump)"));
        }
        let triple = SpdcTriple {
            pump_nm: self.pump_nm,
            signal_nm: ghz_to_nm(signal_ghz),
            idler_nm: ghz_to_nm(idler_ghz),
        };
        phase_mismatch(self.spec, &triple)
    }

    fn intensity(&self, idler_ghz: f64) -> Result<f64> {
        Ok(sinc2(self.mismatch(idler_ghz)? * self.spec.length_um() / 2.0))
    }
}

fn bisect<F>(mut lo: f64, mut hi: f64, abs_tol: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    for _ in 0..200 {
        if (hi - lo).abs() <= abs_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Search parameters for [`emission_bandwidth_with`].
#[derive(Debug, Clone, Copy)]
pub struct BandwidthSearch {
    /// Initial bracketing step away from the peak.
    pub step_ghz: f64,
    /// Maximum distance from the peak that is searched.
    pub window_ghz: f64,
    /// Relative tolerance on the FWHM.
    pub rel_tol: f64,
}

impl Default for BandwidthSearch {
    fn default() -> Self {
        BandwidthSearch { step_ghz: 20.0, window_ghz: 20_000.0, rel_tol: 1e-6 }
    }
}

fn locate_peak(scan: &IdlerScan<'_>, guess_ghz: f64, search: &BandwidthSearch) -> Result<f64> {
    let f0 = scan.mismatch(guess_ghz)?;
    if f0 == 0.0 {
        return Ok(guess_ghz);
    }
    let mut offset = search.step_ghz;
    while offset <= search.window_ghz {
        for sign in [1.0, -1.0] {
            let nu = guess_ghz + sign * offset;
            let Ok(f) = scan.mismatch(nu) else { continue };
            if (f > 0.0) != (f0 > 0.0) {
                let prev = guess_ghz + sign * (offset - search.step_ghz);
                return bisect(prev, nu, 1e-9 * guess_ghz, |x| scan.mismatch(x));
            }
        }
        offset += search.step_ghz;
    }
    Err(Error::Solver(format!(
        "no phase-matching peak within {:.0} GHz of {guess_ghz:.1} GHz",
        search.window_ghz
    )))
}

fn half_max_crossing(scan: &IdlerScan<'_>, peak_ghz: f64, dir: f64, search: &BandwidthSearch) -> Result<f64> {
    let mut inner = peak_ghz;
    let mut offset = search.step_ghz;
    while offset <= search.window_ghz {
        let nu = peak_ghz + dir * offset;
        if scan.intensity(nu)? < 0.5 {
            return bisect(inner, nu, 1e-3 * search.rel_tol * search.step_ghz, |x| {
                Ok(scan.intensity(x)? - 0.5)
            });
        }
        inner = nu;
        offset += search.step_ghz;
    }
    Err(Error::Solver(format!(
        "no half-maximum crossing within [{:.1}, {:.1}] GHz",
        peak_ghz - search.window_ghz,
        peak_ghz + search.window_ghz
    )))
}

/// Idler peak frequency and FWHM (GHz) of the phase-matching spectrum.
fn peak_and_fwhm(spec: &CrystalSpec, pump_nm: f64, idler_center_nm: f64, search: &BandwidthSearch) -> Result<(f64, f64)> {
    let resolved;
    let spec = if spec.poling_period_um.is_none() {
        let triple = SpdcTriple::from_pump_and(pump_nm, idler_center_nm)?;
        resolved = spec.clone().with_poling_period(solve_poling_period(spec, &triple)?)?;
        &resolved
    } else {
        spec
    };
    let scan = IdlerScan::new(spec, pump_nm);
    let peak = locate_peak(&scan, nm_to_ghz(idler_center_nm), search)?;
    let hi = half_max_crossing(&scan, peak, 1.0, search)?;
    let lo = half_max_crossing(&scan, peak, -1.0, search)?;
    Ok((peak, hi - lo))
}

/// Emission FWHM in idler optical frequency (GHz).
///
/// When `spec` carries no poling period, one is solved so that the peak
/// sits exactly at `idler_center_nm`; otherwise the peak nearest to it is
/// located first.
pub fn emission_bandwidth(spec: &CrystalSpec, pump_nm: f64, idler_center_nm: f64) -> Result<f64> {
    emission_bandwidth_with(spec, pump_nm, idler_center_nm, &BandwidthSearch::default())
}

pub fn emission_bandwidth_with(
    spec: &CrystalSpec,
    pump_nm: f64,
    idler_center_nm: f64,
    search: &BandwidthSearch,
) -> Result<f64> {
    peak_and_fwhm(spec, pump_nm, idler_center_nm, search).map(|(_, fwhm)| fwhm)
}

/// sinc²(Δk·L/2) sampled on an idler wavelength grid. Requires a poling
/// period on `spec` unless the crystal is meant to be unpoled.
pub fn joint_spectral_intensity(spec: &CrystalSpec, pump_nm: f64, idler_grid_nm: &[f64]) -> Result<SpectralLine> {
    if idler_grid_nm.is_empty() {
        return Err(Error::domain("empty idler grid"));
    }
    let scan = IdlerScan::new(spec, pump_nm);
    let mut samples = idler_grid_nm
        .iter()
        .map(|&nm| {
            conjugate_wavelength(pump_nm, nm)?;
            let ghz = nm_to_ghz(nm);
            Ok((ghz, scan.intensity(ghz)?))
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));

    let best = samples.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
    let analytic = peak_and_fwhm(spec, pump_nm, crate::units::ghz_to_nm(best.0), &BandwidthSearch::default());
    let (center_ghz, fwhm_ghz) = match analytic {
        Ok(v) => v,
        Err(_) => sampled_fwhm(&samples)
            .ok_or_else(|| Error::analysis("grid does not resolve the emission line"))?,
    };
    Ok(SpectralLine { center_ghz, fwhm_ghz, samples })
}

/// Uniform idler grid spanning `center ± half_span` in frequency, returned
/// as wavelengths.
pub fn idler_grid_nm(center_nm: f64, half_span_ghz: f64, n: usize) -> Vec<f64> {
    let c = nm_to_ghz(center_nm);
    if n < 2 {
        return vec![center_nm];
    }
    let step = 2.0 * half_span_ghz / (n - 1) as f64;
    (0..n).map(|i| ghz_to_nm(c - half_span_ghz + i as f64 * step)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodMode {
    /// Re-solve Λ at every pump wavelength so each point is phase matched.
    Resolve,
    /// Keep the period carried by the crystal spec.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningPoint {
    pub pump_nm: f64,
    pub signal_nm: f64,
    pub poling_period_um: Option<f64>,
    pub fwhm_ghz: std::result::Result<f64, String>,
}

/// Signal wavelength and emission bandwidth across a pump range with the
/// idler held fixed. Individual point failures are recorded per point.
pub fn tuning_curve(
    spec: &CrystalSpec,
    pump_range_nm: (f64, f64),
    idler_fixed_nm: f64,
    n_points: usize,
    mode: PeriodMode,
) -> Result<Vec<TuningPoint>> {
    if n_points < 2 {
        return Err(Error::domain("tuning curve needs at least 2 points"));
    }
    let (lo, hi) = pump_range_nm;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::domain("pump range must satisfy 0 < min < max"));
    }
    if mode == PeriodMode::Fixed && spec.poling_period_um.is_none() {
        return Err(Error::domain("fixed-period tuning curve needs a poling period"));
    }
    let step = (hi - lo) / (n_points - 1) as f64;
    (0..n_points)
        .map(|i| {
            let pump_nm = lo + i as f64 * step;
            let signal_nm = conjugate_wavelength(pump_nm, idler_fixed_nm)?;
            let point_spec = match mode {
                PeriodMode::Fixed => Ok(spec.clone()),
                PeriodMode::Resolve => {
                    let triple = SpdcTriple::from_pump_and(pump_nm, idler_fixed_nm)?;
                    solve_poling_period(spec, &triple)
                        .and_then(|p| spec.clone().with_poling_period(p))
                }
            };
            let (period, fwhm) = match point_spec {
                Ok(s) => (
                    s.poling_period_um,
                    emission_bandwidth(&s, pump_nm, idler_fixed_nm).map_err(|e| e.to_string()),
                ),
                Err(e) => (None, Err(e.to_string())),
            };
            Ok(TuningPoint { pump_nm, signal_nm, poling_period_um: period, fwhm_ghz: fwhm })
        })
        .collect()
}
