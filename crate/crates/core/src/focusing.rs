//! Pump focusing parameter ξ = λ_p·L / (2π·w_p²) and the waists that go
//! with it.

use std::f64::consts::PI;

use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Pump waist in µm for a focusing parameter, pump wavelength (nm) and
/// crystal length (mm).
pub fn waist_from_xi(xi: f64, pump_nm: f64, length_mm: f64) -> Result<f64> {
    positive("focusing parameter", xi)?;
    positive("pump wavelength", pump_nm)?;
    positive("crystal length", length_mm)?;
    let lambda_um = pump_nm * 1e-3;
    let length_um = length_mm * 1e3;
    Ok((lambda_um * length_um / (2.0 * PI * xi)).sqrt())
}

/// Focusing parameter for a pump waist in µm.
pub fn xi_from_waist(waist_um: f64, pump_nm: f64, length_mm: f64) -> Result<f64> {
    positive("pump waist", waist_um)?;
    positive("pump wavelength", pump_nm)?;
    positive("crystal length", length_mm)?;
    let lambda_um = pump_nm * 1e-3;
    let length_um = length_mm * 1e3;
    Ok(lambda_um * length_um / (2.0 * PI * waist_um * waist_um))
}

/// Pump focusing together with the fibre-collection waists. The
/// collection waists are design inputs, not derived here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusingPlan {
    pub xi: f64,
    pub pump_waist_um: f64,
    pub signal_waist_um: f64,
    pub idler_waist_um: f64,
    pub pump_nm: f64,
    pub length_mm: f64,
}

impl FocusingPlan {
    pub fn from_xi(xi: f64, pump_nm: f64, length_mm: f64, signal_waist_um: f64, idler_waist_um: f64) -> Result<Self> {
        positive("signal waist", signal_waist_um)?;
        positive("idler waist", idler_waist_um)?;
        Ok(FocusingPlan {
            xi,
            pump_waist_um: waist_from_xi(xi, pump_nm, length_mm)?,
            signal_waist_um,
            idler_waist_um,
            pump_nm,
            length_mm,
        })
    }

    pub fn from_pump_waist(
        pump_waist_um: f64,
        pump_nm: f64,
        length_mm: f64,
        signal_waist_um: f64,
        idler_waist_um: f64,
    ) -> Result<Self> {
        positive("signal waist", signal_waist_um)?;
        positive("idler waist", idler_waist_um)?;
        Ok(FocusingPlan {
            xi: xi_from_waist(pump_waist_um, pump_nm, length_mm)?,
            pump_waist_um,
            signal_waist_um,
            idler_waist_um,
            pump_nm,
            length_mm,
        })
    }

    /// True when ξ and the pump waist agree to 1e-9 relative.
    pub fn is_consistent(&self) -> bool {
        xi_from_waist(self.pump_waist_um, self.pump_nm, self.length_mm)
            .map(|xi| ((xi - self.xi) / self.xi).abs() <= 1e-9)
            .unwrap_or(false)
    }
}
