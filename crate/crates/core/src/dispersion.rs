//! Temperature- and wavelength-dependent refractive index of nonlinear
//! crystals along one principal axis.
//!
//! Coefficients live in plain-text `.disp` files (see `data/ktp_z.disp`).
//! Every record is `key = value`; `#` starts a comment. Recognised keys:
//!
//! | key | value |
//! |-----|-------|
//! | `crystal` | identifier |
//! | `axis` | principal axis label |
//! | `form` | `fan` (A + Bλ²/(λ²−C²) − Dλ²) or `sellmeier` (1 + Σ Bᵢλ²/(λ²−Cᵢ)) |
//! | `sellmeier` | comma-separated coefficients, µm units |
//! | `thermo_linear` | optional, dn/dT polynomial in 1/λ |
//! | `thermo_quadratic` | optional, d²n/dT² polynomial in 1/λ |
//! | `reference_temperature_c` | T₀ of the thermo-optic expansion |
//! | `valid_range_um` | `min, max` |
//! | `valid_temperature_c` | `min, max` |
//! | `citation` | free text |
//!
//! Unknown or duplicated keys are rejected.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::units::nm_to_um;

const KTP_Z: &str = include_str!("../data/ktp_z.disp");

#[derive(Debug, Clone, PartialEq)]
pub enum SellmeierForm {
    /// n² = A + Bλ²/(λ² − C²) − Dλ², coefficients `[A, B, C, D]`.
    Fan { a: f64, b: f64, c: f64, d: f64 },
    /// n² = 1 + Σ Bᵢλ²/(λ² − Cᵢ), coefficients `[B1, C1, B2, C2, ...]`.
    Standard { terms: Vec<(f64, f64)> },
    /// Wavelength-independent index; used for synthetic tables.
    Constant(f64),
}

impl SellmeierForm {
    fn index(&self, um: f64) -> f64 {
        let l2 = um * um;
        match self {
            SellmeierForm::Fan { a, b, c, d } => (a + b * l2 / (l2 - c * c) - d * l2).sqrt(),
            SellmeierForm::Standard { terms } => {
                let sum: f64 = terms.iter().map(|(b, c)| b * l2 / (l2 - c)).sum();
                (1.0 + sum).sqrt()
            }
            SellmeierForm::Constant(n) => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    pub crystal_id: String,
    pub axis: String,
    pub form: SellmeierForm,
    /// Polynomials in 1/λ (µm) for successive powers of (T − T₀).
    pub thermo_optic: Vec<Vec<f64>>,
    pub reference_temperature_c: f64,
    pub valid_range_um: (f64, f64),
    pub valid_temperature_c: (f64, f64),
    pub citation: String,
}

impl DispersionTable {
    /// Built-in KTP z-axis table.
    pub fn ktp_z() -> Arc<DispersionTable> {
        Arc::new(Self::parse(KTP_Z).expect("bundled KTP table is valid"))
    }

    /// Lookup of bundled tables by identifier, e.g. `"ktp-z"`.
    pub fn builtin(id: &str) -> Option<Arc<DispersionTable>> {
        match id.to_ascii_lowercase().as_str() {
            "ktp-z" | "ktp_z" | "ppktp" => Some(Self::ktp_z()),
            _ => None,
        }
    }

    /// A table with a fixed index, valid over `range_um` at all temperatures.
    pub fn constant(n: f64, range_um: (f64, f64)) -> DispersionTable {
        DispersionTable {
            crystal_id: "synthetic".into(),
            axis: "-".into(),
            form: SellmeierForm::Constant(n),
            thermo_optic: Vec::new(),
            reference_temperature_c: 25.0,
            valid_range_um: range_um,
            valid_temperature_c: (-273.15, 1000.0),
            citation: String::new(),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<DispersionTable> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<DispersionTable> {
        let mut fields: HashMap<&str, (usize, &str)> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {line_no}: expected `key = value`"))
            })?;
            let key = key.trim();
            const KNOWN: [&str; 10] = [
                "crystal",
                "axis",
                "form",
                "sellmeier",
                "thermo_linear",
                "thermo_quadratic",
                "reference_temperature_c",
                "valid_range_um",
                "valid_temperature_c",
                "citation",
            ];
            if !KNOWN.contains(&key) {
                return Err(Error::Format(format!("line {line_no}: unknown key `{key}`")));
            }
            if fields.insert(key, (line_no, value.trim())).is_some() {
                return Err(Error::Format(format!("line {line_no}: duplicate key `{key}`")));
            }
        }

        let get = |key: &str| -> Result<(usize, &str)> {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| Error::Format(format!("missing key `{key}`")))
        };
        let numbers = |key: &str| -> Result<Vec<f64>> {
            let (line_no, value) = get(key)?;
            value
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::Format(format!("line {line_no}: `{key}` has non-numeric entry `{}`", s.trim()))
                    })
                })
                .collect()
        };
        let pair = |key: &str| -> Result<(f64, f64)> {
            let v = numbers(key)?;
            match v.as_slice() {
                [lo, hi] if lo < hi => Ok((*lo, *hi)),
                _ => Err(Error::Format(format!("`{key}` must be `min, max` with min < max"))),
            }
        };

        let coeffs = numbers("sellmeier")?;
        let form = match get("form")?.1 {
            "fan" => match coeffs.as_slice() {
                [a, b, c, d] => SellmeierForm::Fan { a: *a, b: *b, c: *c, d: *d },
                _ => return Err(Error::Format("form `fan` takes 4 coefficients".into())),
            },
            "sellmeier" => {
                if coeffs.is_empty() || coeffs.len() % 2 != 0 {
                    return Err(Error::Format("form `sellmeier` takes coefficient pairs".into()));
                }
                SellmeierForm::Standard {
                    terms: coeffs.chunks(2).map(|c| (c[0], c[1])).collect(),
                }
            }
            other => return Err(Error::Format(format!("unknown dispersion form `{other}`"))),
        };

        let mut thermo_optic = Vec::new();
        if fields.contains_key("thermo_linear") {
            thermo_optic.push(numbers("thermo_linear")?);
            if fields.contains_key("thermo_quadratic") {
                thermo_optic.push(numbers("thermo_quadratic")?);
            }
        } else if fields.contains_key("thermo_quadratic") {
            return Err(Error::Format("`thermo_quadratic` requires `thermo_linear`".into()));
        }

        let reference = numbers("reference_temperature_c")?;
        let [reference_temperature_c] = reference.as_slice() else {
            return Err(Error::Format("`reference_temperature_c` takes one value".into()));
        };

        let table = DispersionTable {
            crystal_id: get("crystal")?.1.to_string(),
            axis: get("axis")?.1.to_string(),
            form,
            thermo_optic,
            reference_temperature_c: *reference_temperature_c,
            valid_range_um: pair("valid_range_um")?,
            valid_temperature_c: pair("valid_temperature_c")?,
            citation: fields.get("citation").map(|v| v.1.to_string()).unwrap_or_default(),
        };
        if table.valid_range_um.0 <= 0.0 {
            return Err(Error::Format("valid_range_um must be positive".into()));
        }
        Ok(table)
    }

    fn check(&self, um: f64, temperature_c: f64) -> Result<()> {
        let (lo, hi) = self.valid_range_um;
        if !um.is_finite() || um < lo {
            return Err(Error::domain(format!(
                "{}-{}: wavelength {:.4} um below valid minimum {lo} um",
                self.crystal_id, self.axis, um
            )));
        }
        if um > hi {
            return Err(Error::domain(format!(
                "{}-{}: wavelength {:.4} um above valid maximum {hi} um",
                self.crystal_id, self.axis, um
            )));
        }
        let (tlo, thi) = self.valid_temperature_c;
        if !(tlo..=thi).contains(&temperature_c) {
            return Err(Error::domain(format!(
                "{}-{}: temperature {temperature_c} C outside [{tlo}, {thi}] C",
                self.crystal_id, self.axis
            )));
        }
        Ok(())
    }

    fn index_um(&self, um: f64, temperature_c: f64) -> f64 {
        let dt = temperature_c - self.reference_temperature_c;
        let mut n = self.form.index(um);
        let mut dt_pow = 1.0;
        for poly in &self.thermo_optic {
            dt_pow *= dt;
            let coeff: f64 = poly
                .iter()
                .enumerate()
                .map(|(m, a)| a / um.powi(m as i32))
                .sum();
            n += coeff * dt_pow;
        }
        n
    }

    /// Refractive index at a vacuum wavelength in nm and temperature in °C.
    pub fn refractive_index(&self, wavelength_nm: f64, temperature_c: f64) -> Result<f64> {
        let um = nm_to_um(wavelength_nm);
        self.check(um, temperature_c)?;
        Ok(self.index_um(um, temperature_c))
    }

    /// Angular wavenumber k = 2πn/λ in rad/µm.
    pub fn wave_number(&self, wavelength_nm: f64, temperature_c: f64) -> Result<f64> {
        let um = nm_to_um(wavelength_nm);
        self.check(um, temperature_c)?;
        Ok(2.0 * PI * self.index_um(um, temperature_c) / um)
    }
}
