//! Run configuration files.
//!
//! TOML, with every physical quantity carrying its unit in the key name
//! (`length_mm`, `dead_time_ns`, `pde_frac`, ...). Unknown keys, missing
//! unit suffixes and unresolved detector names are reported with the file
//! and line they occur on.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::detection::{combine_jitter, ArmBudget, CoincidenceWindow, DetectorModel};
use crate::dispersion::DispersionTable;
use crate::error::{Error, Result};
use crate::phasematch::{solve_poling_period, CrystalSpec, SpdcTriple};
use crate::polarization::EntangledStateModel;
use crate::sim::{AnalyzerSettings, PolarizationDrift, PolarizationSetup, SimConfig, DEFAULT_MAX_EVENTS};

/// Environment variable naming the directory searched for relative config
/// paths and for the default `pairsource.toml`.
pub const CONFIG_DIR_ENV: &str = "PAIRSOURCE_CONFIG_DIR";
pub const DEFAULT_CONFIG_NAME: &str = "pairsource.toml";

/// Recognised unit suffixes, used to explain unknown-key errors.
pub const UNIT_SUFFIXES: &[&str] = &[
    "_nm", "_um", "_mm", "_ps", "_ns", "_s", "_hz", "_hz_per_mw", "_mw", "_c", "_ghz", "_frac", "_rad", "_deg",
    "_count", "_unitless",
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub crystal: CrystalSection,
    pub source: SourceSection,
    #[serde(default)]
    pub detectors: BTreeMap<String, DetectorSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    pub polarization: Option<PolarizationSection>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    /// Built-in table id (`ktp-z`) or a path to a dispersion file,
    /// relative to the config file.
    pub dispersion: String,
    pub length_mm: f64,
    pub temperature_c: f64,
    /// Solved for the design wavelengths when absent.
    pub poling_period_um: Option<f64>,
    pub aperture_width_mm: Option<f64>,
    pub aperture_height_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub pump_nm: f64,
    pub idler_nm: f64,
    pub focusing_xi_unitless: Option<f64>,
    pub signal_waist_um: Option<f64>,
    pub idler_waist_um: Option<f64>,
    pub pump_powers_mw: Vec<f64>,
    /// Pair generation rate per mW of pump.
    pub brightness_hz_per_mw: f64,
    /// Optical transmission of each arm up to the detector.
    pub signal_transmission_frac: f64,
    pub idler_transmission_frac: f64,
    pub signal_detector: String,
    pub idler_detector: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub pde_frac: f64,
    pub dead_time_ns: f64,
    #[serde(default)]
    pub dark_rate_hz: f64,
    #[serde(default)]
    pub afterpulse_prob_frac: f64,
    #[serde(default)]
    pub afterpulse_tau_ns: f64,
    #[serde(default)]
    pub jitter_fwhm_ps: f64,
}

impl DetectorSection {
    pub fn model(&self) -> DetectorModel {
        DetectorModel {
            pde: self.pde_frac,
            dead_time_ns: self.dead_time_ns,
            dark_rate_hz: self.dark_rate_hz,
            afterpulse_prob: self.afterpulse_prob_frac,
            afterpulse_tau_ns: self.afterpulse_tau_ns,
            jitter_fwhm_ps: self.jitter_fwhm_ps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Coincidence window; 10·σ_total when absent.
    pub window_ps: Option<f64>,
    pub window_sweep_ps: Vec<f64>,
    /// Delayed-window accidental estimate instead of singles product.
    pub accidental_delay_ps: Option<f64>,
    pub tuning_pump_min_nm: f64,
    pub tuning_pump_max_nm: f64,
    pub tuning_points_count: usize,
    pub jsi_half_span_ghz: f64,
    pub jsi_points_count: usize,
    pub filter_fwhm_ghz: f64,
    pub scan_half_span_ghz: f64,
    pub scan_step_ghz: f64,
    pub bootstrap_resamples_count: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            window_ps: None,
            window_sweep_ps: Vec::new(),
            accidental_delay_ps: None,
            tuning_pump_min_nm: 450.0,
            tuning_pump_max_nm: 500.0,
            tuning_points_count: 11,
            jsi_half_span_ghz: 1000.0,
            jsi_points_count: 401,
            filter_fwhm_ghz: 125.0,
            scan_half_span_ghz: 800.0,
            scan_step_ghz: 2.0,
            bootstrap_resamples_count: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub duration_s: f64,
    /// Pump power of the single-run simulation; the first sweep power when
    /// absent.
    pub power_mw: Option<f64>,
    pub max_events_count: u64,
    pub record_origins: bool,
    /// `binary` (QTT1) or `text`.
    pub stream_format: String,
    /// Route photons through the `[polarization]` analyzers in `simulate`.
    pub route_polarization: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            duration_s: 1.0,
            power_mw: None,
            max_events_count: DEFAULT_MAX_EVENTS,
            record_origins: false,
            stream_format: "binary".into(),
            route_polarization: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolarizationSection {
    pub phase_rad: f64,
    pub amplitude_balance_frac: f64,
    pub p_mix_frac: f64,
    /// `pam` or `fixed`.
    pub analyzer: String,
    pub signal_angle_deg: f64,
    pub idler_angle_deg: f64,
    pub drift_amplitude_rad: Option<f64>,
    pub drift_period_s: Option<f64>,
    pub phase_grid_count: usize,
}

impl Default for PolarizationSection {
    fn default() -> Self {
        PolarizationSection {
            phase_rad: 0.0,
            amplitude_balance_frac: 0.5,
            p_mix_frac: 0.0,
            analyzer: "pam".into(),
            signal_angle_deg: 0.0,
            idler_angle_deg: 0.0,
            drift_amplitude_rad: None,
            drift_period_s: None,
            phase_grid_count: 16,
        }
    }
}

/// A parsed and validated configuration together with its provenance.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: PathBuf,
    /// Hex SHA-256 of the file contents.
    pub sha256: String,
    text: String,
}

impl LoadedConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<LoadedConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: 0,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, path)
    }

    /// Parses `text` as if read from `path` (used for messages and for
    /// resolving relative dispersion files).
    pub fn parse(text: &str, path: impl AsRef<Path>) -> Result<LoadedConfig> {
        let path = path.as_ref().to_path_buf();
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(0);
            Error::Config { path: path.clone(), line, message: explain(e.message()) }
        })?;
        let loaded = LoadedConfig { config, path, sha256: hex::encode(Sha256::digest(text.as_bytes())), text: text.to_string() };
        loaded.validate()?;
        Ok(loaded)
    }

    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> Error {
        Error::Config { path: self.path.clone(), line: locate(&self.text, section, key), message: message.into() }
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let positive = |section: &str, key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(self.err(section, key, format!("`{key}` must be > 0, got {v}")))
            }
        };
        let fraction = |section: &str, key: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(self.err(section, key, format!("`{key}` must lie in [0, 1], got {v}")))
            }
        };
        positive("crystal", "length_mm", c.crystal.length_mm)?;
        if let Some(p) = c.crystal.poling_period_um {
            positive("crystal", "poling_period_um", p)?;
        }
        positive("source", "pump_nm", c.source.pump_nm)?;
        positive("source", "idler_nm", c.source.idler_nm)?;
        if c.source.idler_nm <= c.source.pump_nm {
            return Err(self.err("source", "idler_nm", "idler must be longer than the pump"));
        }
        if c.source.pump_powers_mw.is_empty() {
            return Err(self.err("source", "pump_powers_mw", "`pump_powers_mw` must list at least one power"));
        }
        for &p in &c.source.pump_powers_mw {
            positive("source", "pump_powers_mw", p)?;
        }
        positive("source", "brightness_hz_per_mw", c.source.brightness_hz_per_mw)?;
        fraction("source", "signal_transmission_frac", c.source.signal_transmission_frac)?;
        fraction("source", "idler_transmission_frac", c.source.idler_transmission_frac)?;
        for key in ["signal_detector", "idler_detector"] {
            let name = if key == "signal_detector" { &c.source.signal_detector } else { &c.source.idler_detector };
            if !c.detectors.contains_key(name) {
                let known: Vec<&str> = c.detectors.keys().map(String::as_str).collect();
                return Err(self.err("source", key, format!("detector `{name}` is not defined (known: {})", known.join(", "))));
            }
        }
        for (name, d) in &c.detectors {
            let section = format!("detectors.{name}");
            d.model().validate().map_err(|e| self.err(&section, "", e.to_string()))?;
            if d.pde_frac == 0.0 {
                return Err(self.err(&section, "pde_frac", "`pde_frac` must be > 0"));
            }
        }
        let a = &c.analysis;
        if let Some(w) = a.window_ps {
            if !(w >= 0.0) {
                return Err(self.err("analysis", "window_ps", "`window_ps` must be >= 0"));
            }
        }
        if a.window_sweep_ps.windows(2).any(|w| w[1] < w[0]) || a.window_sweep_ps.iter().any(|w| !(*w >= 0.0)) {
            return Err(self.err("analysis", "window_sweep_ps", "`window_sweep_ps` must be ascending and >= 0"));
        }
        if !(a.tuning_pump_max_nm > a.tuning_pump_min_nm && a.tuning_pump_min_nm > 0.0) {
            return Err(self.err("analysis", "tuning_pump_max_nm", "tuning range must satisfy 0 < min < max"));
        }
        if a.tuning_points_count < 2 {
            return Err(self.err("analysis", "tuning_points_count", "need at least 2 tuning points"));
        }
        if a.jsi_points_count < 3 {
            return Err(self.err("analysis", "jsi_points_count", "need at least 3 JSI points"));
        }
        positive("analysis", "filter_fwhm_ghz", a.filter_fwhm_ghz)?;
        positive("analysis", "scan_step_ghz", a.scan_step_ghz)?;
        positive("analysis", "scan_half_span_ghz", a.scan_half_span_ghz)?;
        positive("simulation", "duration_s", c.simulation.duration_s)?;
        if let Some(p) = c.simulation.power_mw {
            if !(p >= 0.0) {
                return Err(self.err("simulation", "power_mw", "`power_mw` must be >= 0"));
            }
        }
        if c.simulation.route_polarization && c.polarization.is_none() {
            return Err(self.err("simulation", "route_polarization", "`route_polarization` needs a [polarization] section"));
        }
        if !matches!(c.simulation.stream_format.as_str(), "binary" | "text") {
            return Err(self.err("simulation", "stream_format", "`stream_format` must be `binary` or `text`"));
        }
        if let Some(p) = &c.polarization {
            EntangledStateModel::new(p.phase_rad, p.amplitude_balance_frac, p.p_mix_frac)
                .map_err(|e| self.err("polarization", "", e.to_string()))?;
            if !matches!(p.analyzer.as_str(), "pam" | "fixed") {
                return Err(self.err("polarization", "analyzer", "`analyzer` must be `pam` or `fixed`"));
            }
            match (p.drift_amplitude_rad, p.drift_period_s) {
                (None, None) => {}
                (Some(_), Some(t)) => positive("polarization", "drift_period_s", t)?,
                _ => {
                    return Err(self.err("polarization", "drift_amplitude_rad", "drift needs both amplitude and period"))
                }
            }
        }
        Ok(())
    }

    pub fn dispersion(&self) -> Result<Arc<DispersionTable>> {
        let id = &self.config.crystal.dispersion;
        if let Some(t) = DispersionTable::builtin(id) {
            return Ok(t);
        }
        let base = self.path.parent().unwrap_or(Path::new("."));
        let file = base.join(id);
        if !file.exists() {
            return Err(self.err("crystal", "dispersion", format!("`{id}` is neither a built-in table nor an existing file")));
        }
        Ok(Arc::new(DispersionTable::from_file(file)?))
    }

    /// Crystal with its poling period, solved for the design wavelengths if
    /// not given.
    pub fn crystal(&self) -> Result<CrystalSpec> {
        let c = &self.config.crystal;
        let mut spec = CrystalSpec::new(self.dispersion()?, c.length_mm, c.temperature_c)?;
        if let (Some(w), Some(h)) = (c.aperture_width_mm, c.aperture_height_mm) {
            spec = spec.with_aperture(w, h)?;
        }
        let period = match c.poling_period_um {
            Some(p) => p,
            None => solve_poling_period(&spec, &self.design_triple()?)?,
        };
        spec.with_poling_period(period)
    }

    pub fn design_triple(&self) -> Result<SpdcTriple> {
        SpdcTriple::from_pump_and(self.config.source.pump_nm, self.config.source.idler_nm)
    }

    pub fn detector(&self, name: &str) -> Result<DetectorModel> {
        self.config
            .detectors
            .get(name)
            .map(DetectorSection::model)
            .ok_or_else(|| self.err("source", name, format!("detector `{name}` is not defined")))
    }

    /// (signal, idler) budgets: η_static = transmission × PDE.
    pub fn arms(&self) -> Result<(ArmBudget, ArmBudget)> {
        let s = &self.config.source;
        let signal = ArmBudget::from_transmission(s.signal_transmission_frac, self.detector(&s.signal_detector)?)?;
        let idler = ArmBudget::from_transmission(s.idler_transmission_frac, self.detector(&s.idler_detector)?)?;
        Ok((signal, idler))
    }

    pub fn pgr_at(&self, power_mw: f64) -> f64 {
        self.config.source.brightness_hz_per_mw * power_mw
    }

    /// Window from config, or 10·σ_total from the detectors' jitter.
    pub fn window(&self) -> Result<CoincidenceWindow> {
        let (s, i) = self.arms()?;
        let jitters: Vec<f64> =
            [s.detector.jitter_fwhm_ps, i.detector.jitter_fwhm_ps].into_iter().filter(|j| *j > 0.0).collect();
        let sigma_total = if jitters.is_empty() { None } else { Some(combine_jitter(&jitters)?) };
        match (self.config.analysis.window_ps, sigma_total) {
            (Some(w), Some(st)) => CoincidenceWindow::new(w, st),
            // Without jitter every true pair is captured.
            (Some(w), None) => CoincidenceWindow::new(w, 1e-9),
            (None, Some(st)) => CoincidenceWindow::new(10.0 * st, st),
            (None, None) => Err(self.err("analysis", "window_ps", "`window_ps` is required when detectors have no jitter")),
        }
    }

    pub fn simulation_power_mw(&self) -> f64 {
        self.config.simulation.power_mw.unwrap_or(self.config.source.pump_powers_mw[0])
    }

    pub fn sim_config(&self, power_mw: f64, seed: u64) -> Result<SimConfig> {
        let (signal, idler) = self.arms()?;
        let sim = &self.config.simulation;
        let mut cfg = SimConfig::new(self.pgr_at(power_mw), sim.duration_s, seed, signal, idler);
        cfg.max_events = sim.max_events_count;
        cfg.record_origins = sim.record_origins;
        if sim.route_polarization {
            cfg.polarization = self.polarization_setup()?;
        }
        Ok(cfg)
    }

    pub fn polarization_setup(&self) -> Result<Option<PolarizationSetup>> {
        let Some(p) = &self.config.polarization else { return Ok(None) };
        let state = EntangledStateModel::new(p.phase_rad, p.amplitude_balance_frac, p.p_mix_frac)?;
        let analyzer = match p.analyzer.as_str() {
            "fixed" => AnalyzerSettings::Fixed {
                signal_rad: p.signal_angle_deg.to_radians(),
                idler_rad: p.idler_angle_deg.to_radians(),
            },
            _ => AnalyzerSettings::Pam,
        };
        let drift = match (p.drift_amplitude_rad, p.drift_period_s) {
            (Some(amplitude_rad), Some(period_s)) => Some(PolarizationDrift { amplitude_rad, period_s }),
            _ => None,
        };
        Ok(Some(PolarizationSetup { state, analyzer, drift }))
    }

    pub fn output_dir(&self) -> Option<PathBuf> {
        let dir = self.config.output_dir.as_ref()?;
        Some(match self.path.parent() {
            Some(base) if dir.is_relative() => base.join(dir),
            _ => dir.clone(),
        })
    }
}

/// Resolves a config path: as given, else relative to `$PAIRSOURCE_CONFIG_DIR`.
pub fn resolve_path(path: Option<&Path>) -> Option<PathBuf> {
    let dir = std::env::var_os(CONFIG_DIR_ENV).map(PathBuf::from);
    match path {
        Some(p) if p.exists() || p.is_absolute() => Some(p.to_path_buf()),
        Some(p) => Some(dir.map(|d| d.join(p)).filter(|q| q.exists()).unwrap_or_else(|| p.to_path_buf())),
        None => dir.map(|d| d.join(DEFAULT_CONFIG_NAME)).filter(|q| q.exists()),
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Line of `key` inside `[section]`, or of the section header when the key
/// is empty or not found; 0 when neither is present.
fn locate(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header_line = i + 1;
            }
            continue;
        }
        if current == section && !key.is_empty() {
            let k = line.split('=').next().unwrap_or("").trim();
            if k == key {
                return i + 1;
            }
        }
    }
    header_line
}

/// Rewrites serde's unknown-field message when the key is a known key
/// missing its unit suffix.
fn explain(message: &str) -> String {
    let message = message.trim();
    let Some(rest) = message.strip_prefix("unknown field `") else { return message.to_string() };
    let Some((field, expected)) = rest.split_once('`') else { return message.to_string() };
    let candidates: Vec<&str> = expected.split('`').skip(1).step_by(2).collect();
    if let Some(full) = candidates.iter().find(|c| {
        c.strip_prefix(field).and_then(|s| s.strip_prefix('_')).is_some_and(|suffix| {
            UNIT_SUFFIXES.iter().any(|u| u.trim_start_matches('_') == suffix || suffix.ends_with(u.trim_start_matches('_')))
        })
    }) {
        return format!("missing unit suffix on `{field}` (expected `{full}`)");
    }
    message.to_string()
}
