//! Two-qubit polarization model of a crossed-crystal source, analyzer
//! projections, and visibility/fidelity estimators.
//!
//! The state is ρ = (1 − p_mix)·|Ψ⟩⟨Ψ| + p_mix·diag(b, 0, 0, 1 − b) with
//! |Ψ⟩ = √b|HH⟩ + e^{iφ}√(1 − b)|VV⟩ in the basis {HH, HV, VH, VV}
//! (signal first). A linear analyzer at angle θ projects onto
//! cos θ|H⟩ + sin θ|V⟩.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntangledStateModel {
    pub phase_rad: f64,
    /// Weight of the HH term; 0.5 is balanced.
    pub amplitude_balance: f64,
    /// Mixing weight toward the state dephased in H/V.
    pub p_mix: f64,
}

impl Default for EntangledStateModel {
    fn default() -> Self {
        EntangledStateModel { phase_rad: 0.0, amplitude_balance: 0.5, p_mix: 0.0 }
    }
}

pub type DensityMatrix = [[Complex64; 4]; 4];

impl EntangledStateModel {
    pub fn new(phase_rad: f64, amplitude_balance: f64, p_mix: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&amplitude_balance) {
            return Err(Error::domain(format!("amplitude balance must lie in [0, 1], got {amplitude_balance}")));
        }
        if !(0.0..=1.0).contains(&p_mix) {
            return Err(Error::domain(format!("p_mix must lie in [0, 1], got {p_mix}")));
        }
        if !phase_rad.is_finite() {
            return Err(Error::domain("phase must be finite"));
        }
        Ok(EntangledStateModel { phase_rad, amplitude_balance, p_mix })
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let b = self.amplitude_balance;
        let psi = [
            Complex64::new(b.sqrt(), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::from_polar((1.0 - b).sqrt(), self.phase_rad),
        ];
        let mut rho = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (r, row) in rho.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (1.0 - self.p_mix) * psi[r] * psi[c].conj();
            }
        }
        rho[0][0] += self.p_mix * b;
        rho[3][3] += self.p_mix * (1.0 - b);
        rho
    }
}

/// Probability that linear analyzers at (θ_signal, θ_idler) both transmit.
pub fn joint_probability(state: &EntangledStateModel, theta_signal: f64, theta_idler: f64) -> f64 {
    let (ss, cs) = theta_signal.sin_cos();
    let (si, ci) = theta_idler.sin_cos();
    // Product analyzer vector in {HH, HV, VH, VV}; real, so ⟨v|ρ|v⟩ = Σ v_r ρ_rc v_c.
    let v = [cs * ci, cs * si, ss * ci, ss * si];
    let rho = state.density_matrix();
    let mut p = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            p += v[r] * v[c] * rho[r][c].re;
        }
    }
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    HV,
    DA,
}

impl Basis {
    /// Half-wave-plate angle in front of the PBS.
    pub fn hwp_angle(self) -> f64 {
        match self {
            Basis::HV => 0.0,
            Basis::DA => 22.5f64.to_radians(),
        }
    }

    /// Polarization transmitted to the PBS's first output. A HWP at α maps
    /// θ → 2α − θ, so the PBS H port analyses 2α.
    pub fn analyzer_angle(self) -> f64 {
        2.0 * self.hwp_angle()
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::HV => "HV",
            Basis::DA => "DA",
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HV" | "H/V" => Ok(Basis::HV),
            "DA" | "D/A" => Ok(Basis::DA),
            other => Err(Error::Format(format!("unknown basis `{other}`"))),
        }
    }
}

/// Joint outcome probabilities `[aa, ab, ba, bb]` for analyzers at
/// (θ_s, θ_i), each followed by a two-port PBS.
pub fn outcome_probabilities(state: &EntangledStateModel, theta_signal: f64, theta_idler: f64) -> [f64; 4] {
    [
        joint_probability(state, theta_signal, theta_idler),
        joint_probability(state, theta_signal, theta_idler + FRAC_PI_2),
        joint_probability(state, theta_signal + FRAC_PI_2, theta_idler),
        joint_probability(state, theta_signal + FRAC_PI_2, theta_idler + FRAC_PI_2),
    ]
}

/// Outcome probabilities with per-arm survival: the four cells sum to
/// `transmission_signal · transmission_idler`.
pub fn basis_outcomes(state: &EntangledStateModel, basis: Basis, transmission_signal: f64, transmission_idler: f64) -> [f64; 4] {
    let a = basis.analyzer_angle();
    outcome_probabilities(state, a, a).map(|p| p * transmission_signal * transmission_idler)
}

/// 2×2 coincidence table for one basis: cells ordered `[aa, ab, ba, bb]`
/// with the signal outcome first.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    pub basis: Basis,
    pub counts: [u64; 4],
    pub accidentals: Option<[f64; 4]>,
    pub integration_s: f64,
}

impl CorrelationTable {
    pub fn new(basis: Basis, counts: [u64; 4]) -> Self {
        CorrelationTable { basis, counts, accidentals: None, integration_s: 0.0 }
    }

    pub fn with_accidentals(mut self, accidentals: [f64; 4]) -> Result<Self> {
        if accidentals.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::domain("accidental estimates must be >= 0"));
        }
        self.accidentals = Some(accidentals);
        Ok(self)
    }

    /// Raw minus accidental counts; the flag is set when any cell is
    /// negative. Cells are never clamped.
    pub fn corrected(&self) -> ([f64; 4], bool) {
        let mut out = self.counts.map(|c| c as f64);
        if let Some(acc) = self.accidentals {
            for (o, a) in out.iter_mut().zip(acc) {
                *o -= a;
            }
        }
        let negative = out.iter().any(|c| *c < 0.0);
        (out, negative)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub const CSV_HEADER: &'static str = "basis,c_aa,c_ab,c_ba,c_bb,acc_aa,acc_ab,acc_ba,acc_bb,integration_s";

    pub fn to_csv_row(&self) -> String {
        let acc = self.accidentals.unwrap_or([0.0; 4]);
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.basis, self.counts[0], self.counts[1], self.counts[2], self.counts[3], acc[0], acc[1], acc[2], acc[3], self.integration_s
        )
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let cols: Vec<&str> = row.split(',').map(str::trim).collect();
        if cols.len() != 10 {
            return Err(Error::Format(format!("correlation row needs 10 columns, got {}", cols.len())));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|_| Error::Format(format!("bad count `{s}`")));
        let float = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number `{s}`")));
        let counts = [int(cols[1])?, int(cols[2])?, int(cols[3])?, int(cols[4])?];
        let acc = [float(cols[5])?, float(cols[6])?, float(cols[7])?, float(cols[8])?];
        let table = CorrelationTable {
            basis: cols[0].parse()?,
            counts,
            accidentals: None,
            integration_s: float(cols[9])?,
        };
        if acc.iter().all(|a| *a == 0.0) {
            Ok(table)
        } else {
            table.with_accidentals(acc)
        }
    }

    /// Parses a CSV document with the [`Self::CSV_HEADER`] header; `#`
    /// lines are skipped.
    pub fn read_csv(text: &str) -> Result<Vec<Self>> {
        let mut rows = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        match rows.next() {
            Some(h) if h == Self::CSV_HEADER => {}
            _ => return Err(Error::Format(format!("expected header `{}`", Self::CSV_HEADER))),
        }
        rows.map(Self::from_csv_row).collect()
    }
}

/// (C_aa + C_bb − C_ab − C_ba) / (C_aa + C_bb + C_ab + C_ba), on
/// accidental-corrected counts when estimates are present.
pub fn visibility(table: &CorrelationTable) -> Result<f64> {
    let ([aa, ab, ba, bb], _) = table.corrected();
    let den = aa + ab + ba + bb;
    if den == 0.0 {
        return Err(Error::analysis("visibility undefined: zero total counts"));
    }
    Ok((aa + bb - ab - ba) / den)
}

/// Lower bound on the Bell-state fidelity from two unbiased bases.
pub fn fidelity_bound(v_hv: f64, v_da: f64) -> f64 {
    (v_hv + v_da) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityError {
    pub std_err: f64,
    /// The delta method collapses to zero when |V| = 1.
    pub boundary_degenerate: bool,
}

/// First-order propagation of Poisson errors on the raw counts through the
/// visibility ratio; accidental estimates are treated as exact.
pub fn uncertainty(table: &CorrelationTable) -> Result<VisibilityError> {
    if table.total() == 0 {
        return Err(Error::analysis("uncertainty undefined: zero total counts"));
    }
    let v = visibility(table)?;
    let ([caa, cab, cba, cbb], _) = table.corrected();
    let n = caa + cab + cba + cbb;
    let [raa, rab, rba, rbb] = table.counts.map(|c| c as f64);
    // ∂V/∂C_same = (1 − V)/N, ∂V/∂C_cross = −(1 + V)/N
    let var = ((1.0 - v).powi(2) * (raa + rbb) + (1.0 + v).powi(2) * (rab + rba)) / (n * n);
    let std_err = var.sqrt();
    Ok(VisibilityError { std_err, boundary_degenerate: std_err == 0.0 })
}

/// Parametric bootstrap: resample every raw cell as Poisson around its
/// observed count and take the spread of the resulting visibilities.
pub fn bootstrap_uncertainty(table: &CorrelationTable, resamples: usize, seed: u64) -> Result<f64> {
    if table.total() == 0 {
        return Err(Error::analysis("uncertainty undefined: zero total counts"));
    }
    if resamples < 2 {
        return Err(Error::domain("bootstrap needs at least 2 resamples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Option<Poisson<f64>>> = table
        .counts
        .iter()
        .map(|&c| if c == 0 { None } else { Some(Poisson::new(c as f64).expect("positive mean")) })
        .collect();
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut counts = [0u64; 4];
        for (slot, dist) in counts.iter_mut().zip(&dists) {
            *slot = dist.as_ref().map(|d| d.sample(&mut rng) as u64).unwrap_or(0);
        }
        let resampled = CorrelationTable { counts, ..table.clone() };
        if let Ok(v) = visibility(&resampled) {
            values.push(v);
        }
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Model visibility of `state` in `basis`, via the four analyzer outcomes.
pub fn model_visibility(state: &EntangledStateModel, basis: Basis) -> f64 {
    let [aa, ab, ba, bb] = basis_outcomes(state, basis, 1.0, 1.0);
    (aa + bb - ab - ba) / (aa + ab + ba + bb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub phase_rad: f64,
    pub v_hv: f64,
    pub v_da: f64,
}

/// Model visibilities as the relative phase of `template` is swept.
pub fn visibility_vs_phase(template: &EntangledStateModel, phases_rad: &[f64]) -> Vec<PhasePoint> {
    phases_rad
        .iter()
        .map(|&phase_rad| {
            let s = EntangledStateModel { phase_rad, ..*template };
            PhasePoint { phase_rad, v_hv: model_visibility(&s, Basis::HV), v_da: model_visibility(&s, Basis::DA) }
        })
        .collect()
}
