//! Command-line front end.
//!
//! Every subcommand writes one or more CSV files into the output directory.
//! Each file starts with `#` metadata lines (tool version, config hash,
//! seed) followed by a plain CSV body. Exit status is 0 on success, 1 for
//! validation errors (bad flags, config or out-of-domain inputs) and 2 for
//! runtime failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    brightness_fit, count_coincidences_with, deconvolve_fwhm, filter_scan, heralding, pair_generation_rate,
    spectral_brightness, window_sweep, AccidentalMode, CoincidenceResult,
};
use crate::config::{resolve_path, LoadedConfig};
use crate::detection::{predict_rates, CoincidenceWindow};
use crate::error::{Error, Result};
use crate::focusing::{waist_from_xi, xi_from_waist};
use crate::phasematch::{
    emission_bandwidth, idler_grid_nm, CrystalSpec, joint_spectral_intensity, tuning_curve, PeriodMode, SpectralLine,
};
use crate::polarization::{
    bootstrap_uncertainty, fidelity_bound, uncertainty, visibility, visibility_vs_phase, Basis, CorrelationTable,
};
use crate::sim::{simulate_with_stats, AnalyzerSettings};
use crate::stream::TimestampStream;
use crate::units::nm_to_ghz;

const BUILTIN_CONFIG: &str = include_str!("../configs/paper.toml");
const BUILTIN_CONFIG_NAME: &str = "<builtin paper.toml>";
const DEFAULT_OUT_DIR: &str = "pairsource-out";
const MANIFEST: &str = "streams.csv";

#[derive(Debug, Parser)]
#[command(name = "pairsource", version, about = "Design, simulate and analyse SPDC photon-pair sources")]
struct Cli {
    /// Run configuration (TOML). Relative paths are also tried under
    /// $PAIRSOURCE_CONFIG_DIR; without it the built-in paper config is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and stream files.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Signal wavelength, poling period and bandwidth against pump wavelength.
    TuningCurve(TuningArgs),
    /// Emission FWHM of the configured crystal.
    Bandwidth(BandwidthArgs),
    /// Joint spectral intensity over the idler axis.
    Jsi(JsiArgs),
    /// Pump waist from the focusing parameter or the reverse.
    Waist(WaistArgs),
    /// Predicted singles, coincidences and heralding over the power sweep.
    Predict(PredictArgs),
    /// Monte Carlo timestamp streams.
    Simulate(SimulateArgs),
    /// Coincidences, heralding, PGR and brightness from stream files.
    Analyze(AnalyzeArgs),
    /// Theoretical line seen through a scanned Gaussian filter.
    ScanFilter(ScanArgs),
    /// Remove a Gaussian filter width from a measured FWHM.
    Deconvolve(DeconvolveArgs),
    /// Visibilities and fidelity bound from tables or a simulated run.
    Polarization(PolarizationArgs),
}

#[derive(Debug, Args)]
struct TuningArgs {
    #[arg(long)]
    pump_min_nm: Option<f64>,
    #[arg(long)]
    pump_max_nm: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    idler_nm: Option<f64>,
    /// Keep the design grating instead of re-solving it at each pump.
    #[arg(long)]
    fixed_period: bool,
}

#[derive(Debug, Args)]
struct BandwidthArgs {
    #[arg(long)]
    pump_nm: Option<f64>,
    #[arg(long)]
    idler_nm: Option<f64>,
    #[arg(long)]
    length_mm: Option<f64>,
    #[arg(long)]
    temperature_c: Option<f64>,
}

#[derive(Debug, Args)]
struct JsiArgs {
    #[arg(long)]
    half_span_ghz: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Debug, Args)]
struct WaistArgs {
    #[arg(long, conflicts_with = "waist_um")]
    xi: Option<f64>,
    #[arg(long)]
    waist_um: Option<f64>,
    #[arg(long)]
    pump_nm: Option<f64>,
    #[arg(long)]
    length_mm: Option<f64>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long, value_delimiter = ',')]
    powers_mw: Vec<f64>,
    #[arg(long)]
    window_ps: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Single run at this power instead of the config's.
    #[arg(long, conflicts_with = "sweep")]
    power_mw: Option<f64>,
    /// One stream per configured pump power.
    #[arg(long)]
    sweep: bool,
    /// Overrides `simulation.duration_s`
    #[arg(long)]
    duration_s: Option<f64>,
    /// `binary` or `text`.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Stream files; defaults to the manifest written by `simulate`.
    #[arg(long)]
    stream: Vec<PathBuf>,
    /// Pump power of each stream, in the same order.
    #[arg(long, value_delimiter = ',')]
    power_mw: Vec<f64>,
    #[arg(long)]
    window_ps: Option<f64>,
    /// Estimate accidentals from a delayed window instead of singles.
    #[arg(long)]
    delay_ps: Option<u64>,
    #[arg(long, default_value = "signal")]
    signal_channel: String,
    #[arg(long, default_value = "idler")]
    idler_channel: String,
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Line FWHM; the configured crystal's bandwidth when absent.
    #[arg(long)]
    fwhm_ghz: Option<f64>,
    #[arg(long)]
    filter_ghz: Option<f64>,
    #[arg(long)]
    step_ghz: Option<f64>,
    #[arg(long)]
    half_span_ghz: Option<f64>,
}

#[derive(Debug, Args)]
struct DeconvolveArgs {
    #[arg(long)]
    measured_ghz: f64,
    #[arg(long)]
    filter_ghz: f64,
}

#[derive(Debug, Args)]
struct PolarizationArgs {
    /// Correlation tables CSV; a PAM simulation is run when absent.
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long)]
    power_mw: Option<f64>,
    #[arg(long)]
    duration_s: Option<f64>,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    1
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

struct Context {
    config: LoadedConfig,
    out_dir: PathBuf,
    seed: u64,
    command: &'static str,
}

impl Context {
    fn new(cli: &Cli, command: &'static str) -> Result<Context> {
        let config = match resolve_path(cli.config.as_deref()) {
            Some(p) => LoadedConfig::load(p)?,
            None => LoadedConfig::parse(BUILTIN_CONFIG, BUILTIN_CONFIG_NAME)?,
        };
        let out_dir = match (&cli.out, config.output_dir()) {
            (Some(o), _) => o.clone(),
            (None, Some(d)) if config.path.exists() => d,
            _ => PathBuf::from(DEFAULT_OUT_DIR),
        };
        let seed = cli.seed.unwrap_or(config.config.seed);
        Ok(Context { config, out_dir, seed, command })
    }

    fn metadata(&self) -> String {
        format!(
            "# pairsource {}\n# command={}\n# config={}\n# config_sha256={}\n# seed={}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config.path.display(),
            self.config.sha256,
            self.seed
        )
    }

    fn write_csv(&self, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        let mut text = self.metadata();
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::TuningCurve(_) => "tuning-curve",
        Command::Bandwidth(_) => "bandwidth",
        Command::Jsi(_) => "jsi",
        Command::Waist(_) => "waist",
        Command::Predict(_) => "predict",
        Command::Simulate(_) => "simulate",
        Command::Analyze(_) => "analyze",
        Command::ScanFilter(_) => "scan-filter",
        Command::Deconvolve(_) => "deconvolve",
        Command::Polarization(_) => "polarization",
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let ctx = Context::new(&cli, command_name(&cli.command))?;
    match &cli.command {
        Command::TuningCurve(a) => cmd_tuning(&ctx, a, out),
        Command::Bandwidth(a) => cmd_bandwidth(&ctx, a, out),
        Command::Jsi(a) => cmd_jsi(&ctx, a, out),
        Command::Waist(a) => cmd_waist(&ctx, a, out),
        Command::Predict(a) => cmd_predict(&ctx, a, out),
        Command::Simulate(a) => cmd_simulate(&ctx, a, out),
        Command::Analyze(a) => cmd_analyze(&ctx, a, out),
        Command::ScanFilter(a) => cmd_scan(&ctx, a, out),
        Command::Deconvolve(a) => cmd_deconvolve(&ctx, a, out),
        Command::Polarization(a) => cmd_polarization(&ctx, a, out),
    }
}

fn report(out: &mut dyn Write, path: &Path) -> Result<()> {
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn cmd_tuning(ctx: &Context, a: &TuningArgs, out: &mut dyn Write) -> Result<()> {
    let an = &ctx.config.config.analysis;
    let range = (a.pump_min_nm.unwrap_or(an.tuning_pump_min_nm), a.pump_max_nm.unwrap_or(an.tuning_pump_max_nm));
    let idler = a.idler_nm.unwrap_or(ctx.config.config.source.idler_nm);
    let mode = if a.fixed_period { PeriodMode::Fixed } else { PeriodMode::Resolve };
    let spec = ctx.config.crystal()?;
    let curve = tuning_curve(&spec, range, idler, a.points.unwrap_or(an.tuning_points_count), mode)?;
    let rows: Vec<String> = curve
        .iter()
        .map(|p| {
            let period = p.poling_period_um.map(|v| v.to_string()).unwrap_or_default();
            let (fwhm, note) = match &p.fwhm_ghz {
                Ok(f) => (f.to_string(), String::new()),
                Err(e) => (String::new(), e.replace(',', ";")),
            };
            format!("{},{},{},{},{}", p.pump_nm, p.signal_nm, period, fwhm, note)
        })
        .collect();
    let path = ctx.write_csv("tuning_curve.csv", "pump_nm,signal_nm,poling_period_um,fwhm_ghz,error", &rows)?;
    report(out, &path)
}

fn cmd_bandwidth(ctx: &Context, a: &BandwidthArgs, out: &mut dyn Write) -> Result<()> {
    let src = &ctx.config.config.source;
    let pump = a.pump_nm.unwrap_or(src.pump_nm);
    let idler = a.idler_nm.unwrap_or(src.idler_nm);
    let mut spec = ctx.config.crystal()?;
    if a.length_mm.is_some() || a.temperature_c.is_some() {
        let period = spec.poling_period_um;
        spec = CrystalSpec::new(
            spec.dispersion.clone(),
            a.length_mm.unwrap_or(spec.length_mm),
            a.temperature_c.unwrap_or(spec.temperature_c),
        )?;
        if let Some(p) = period {
            spec = spec.with_poling_period(p)?;
        }
    }
    let fwhm = emission_bandwidth(&spec, pump, idler)?;
    let period = spec.poling_period_um.unwrap_or(f64::NAN);
    writeln!(out, "emission FWHM: {fwhm:.3} GHz (poling period {period:.6} um)")?;
    let row = format!("{pump},{idler},{},{},{period},{fwhm}", spec.length_mm, spec.temperature_c);
    let path = ctx.write_csv("bandwidth.csv", "pump_nm,idler_nm,length_mm,temperature_c,poling_period_um,fwhm_ghz", &[row])?;
    report(out, &path)
}

fn cmd_jsi(ctx: &Context, a: &JsiArgs, out: &mut dyn Write) -> Result<()> {
    let an = &ctx.config.config.analysis;
    let src = &ctx.config.config.source;
    let spec = ctx.config.crystal()?;
    let grid = idler_grid_nm(src.idler_nm, a.half_span_ghz.unwrap_or(an.jsi_half_span_ghz), a.points.unwrap_or(an.jsi_points_count));
    let line = joint_spectral_intensity(&spec, src.pump_nm, &grid)?;
    let pump_ghz = nm_to_ghz(src.pump_nm);
    let rows: Vec<String> = line
        .samples
        .iter()
        .map(|&(ghz, i)| format!("{},{},{},{}", crate::units::ghz_to_nm(ghz), ghz, crate::units::ghz_to_nm(pump_ghz - ghz), i))
        .collect();
    writeln!(out, "JSI centre {:.3} GHz, FWHM {:.3} GHz", line.center_ghz, line.fwhm_ghz)?;
    let path = ctx.write_csv("jsi.csv", "idler_nm,idler_ghz,signal_nm,intensity", &rows)?;
    report(out, &path)
}

fn cmd_waist(ctx: &Context, a: &WaistArgs, out: &mut dyn Write) -> Result<()> {
    let src = &ctx.config.config.source;
    let pump = a.pump_nm.unwrap_or(src.pump_nm);
    let length = a.length_mm.unwrap_or(ctx.config.config.crystal.length_mm);
    let (xi, waist) = match (a.xi, a.waist_um) {
        (_, Some(w)) => (xi_from_waist(w, pump, length)?, w),
        (Some(xi), None) => (xi, waist_from_xi(xi, pump, length)?),
        (None, None) => {
            let xi = src
                .focusing_xi_unitless
                .ok_or_else(|| Error::domain("give --xi or --waist-um, or set source.focusing_xi_unitless"))?;
            (xi, waist_from_xi(xi, pump, length)?)
        }
    };
    writeln!(out, "pump waist: {waist:.2} um (xi = {xi}, pump {pump} nm, L = {length} mm)")?;
    let path = ctx.write_csv("waist.csv", "xi,pump_nm,length_mm,pump_waist_um", &[format!("{xi},{pump},{length},{waist}")])?;
    report(out, &path)
}

pub const PREDICT_HEADER: &str = "power_mw,pgr_hz,singles_signal_hz,singles_idler_hz,true_hz,accidental_hz,measured_hz,\
capture_fraction,herald_signal,herald_idler,eta_dynamic_signal,eta_dynamic_idler,pgr_estimate_hz,high_occupancy";

fn cmd_predict(ctx: &Context, a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let powers = if a.powers_mw.is_empty() { ctx.config.config.source.pump_powers_mw.clone() } else { a.powers_mw.clone() };
    let (signal, idler) = ctx.config.arms()?;
    let mut win = ctx.config.window()?;
    if let Some(w) = a.window_ps {
        win = CoincidenceWindow::new(w, win.sigma_total_ps)?;
    }
    let mut rows = Vec::new();
    for p in powers {
        let pgr = ctx.config.pgr_at(p);
        let r = predict_rates(pgr, &signal, &idler, &win)?;
        rows.push(format!(
            "{p},{pgr},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.singles_signal_hz,
            r.singles_idler_hz,
            r.true_hz,
            r.accidental_hz,
            r.measured_hz,
            r.capture_fraction,
            r.herald_signal,
            r.herald_idler,
            r.eta_dynamic_signal,
            r.eta_dynamic_idler,
            r.pgr_estimate_hz,
            r.high_occupancy
        ));
        if r.high_occupancy {
            writeln!(out, "warning: {p} mW: S·Δt > 0.1, accidental estimate outside its low-occupancy regime")?;
        }
    }
    writeln!(out, "window {} ps, sigma_total {} ps", win.window_ps, win.sigma_total_ps)?;
    let path = ctx.write_csv("predict.csv", PREDICT_HEADER, &rows)?;
    report(out, &path)
}

fn stream_name(index: Option<usize>, power: f64, binary: bool) -> String {
    let ext = if binary { "qtt" } else { "txt" };
    match index {
        None => format!("stream.{ext}"),
        Some(i) => format!("stream_{i:02}_{power}mw.{ext}"),
    }
}

fn cmd_simulate(ctx: &Context, a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let sim = &ctx.config.config.simulation;
    let format = a.format.clone().unwrap_or_else(|| sim.stream_format.clone());
    let binary = match format.as_str() {
        "binary" => true,
        "text" => false,
        other => return Err(Error::domain(format!("unknown stream format `{other}`"))),
    };
    let runs: Vec<(Option<usize>, f64)> = if a.sweep {
        ctx.config.config.source.pump_powers_mw.iter().enumerate().map(|(i, &p)| (Some(i), p)).collect()
    } else {
        vec![(None, a.power_mw.unwrap_or(ctx.config.simulation_power_mw()))]
    };
    std::fs::create_dir_all(&ctx.out_dir)?;
    let mut manifest = Vec::new();
    let mut stats_rows = Vec::new();
    for (index, power) in runs {
        let seed = ctx.seed.wrapping_add(index.unwrap_or(0) as u64);
        let mut cfg = ctx.config.sim_config(power, seed)?;
        if let Some(d) = a.duration_s {
            cfg.duration_s = d;
        }
        let (stream, stats) = simulate_with_stats(&cfg)?;
        let name = stream_name(index, power, binary);
        stream.save(ctx.out_dir.join(&name))?;
        writeln!(out, "{power} mW: {} events -> {name}", stream.events.len())?;
        manifest.push(format!("{power},{name},{},{},{seed}", cfg.pgr_hz, cfg.duration_s));
        for st in stats {
            let label = &stream.channel_map[&st.channel];
            stats_rows.push(format!(
                "{power},{},{label},{},{},{},{}",
                st.channel,
                st.offered,
                st.accepted_primary,
                st.accepted_afterpulses,
                st.livetime()
            ));
        }
    }
    let path = ctx.write_csv(MANIFEST, "power_mw,file,pgr_hz,duration_s,seed", &manifest)?;
    report(out, &path)?;
    let path = ctx.write_csv(
        "simulate_stats.csv",
        "power_mw,channel,label,offered,accepted_primary,accepted_afterpulses,livetime",
        &stats_rows,
    )?;
    report(out, &path)
}

/// (power, stream path) pairs from the simulate manifest.
fn read_manifest(dir: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Format(format!("cannot read {}: {e}; run `simulate` or pass --stream", path.display())))?;
    let mut rows = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).skip(1);
    let mut out = Vec::new();
    for r in rows.by_ref() {
        let cols: Vec<&str> = r.split(',').collect();
        let power: f64 = cols
            .first()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad manifest row `{r}`")))?;
        let file = cols.get(1).ok_or_else(|| Error::Format(format!("bad manifest row `{r}`")))?;
        out.push((power, dir.join(file)));
    }
    Ok(out)
}

/// Folds analyzer outputs (`signal_H`, `signal_V`, ...) into one channel per
/// arm when the stream has no plain `signal`/`idler` channels.
fn arm_view(stream: TimestampStream, labels: [&str; 2]) -> TimestampStream {
    if labels.iter().all(|l| stream.channel(l).is_some()) {
        return stream;
    }
    let prefixed = |l: &str| stream.channel_map.values().any(|v| v.starts_with(&format!("{l}_")));
    if !labels.iter().all(|l| prefixed(l)) {
        return stream;
    }
    let target: std::collections::BTreeMap<u8, u8> = stream
        .channel_map
        .iter()
        .filter_map(|(c, v)| labels.iter().position(|l| v.starts_with(&format!("{l}_"))).map(|k| (*c, k as u8)))
        .collect();
    let events = stream
        .events
        .iter()
        .filter_map(|e| target.get(&e.channel).map(|&channel| crate::stream::Event { channel, time_ps: e.time_ps }))
        .collect();
    TimestampStream {
        events,
        origins: None,
        channel_map: labels.iter().enumerate().map(|(k, l)| (k as u8, l.to_string())).collect(),
        ..stream
    }
}

fn channel_id(stream: &TimestampStream, label: &str) -> Result<u8> {
    stream.channel(label).or_else(|| label.parse().ok().filter(|c| stream.channel_map.contains_key(c))).ok_or_else(|| {
        let known: Vec<&str> = stream.channel_map.values().map(String::as_str).collect();
        Error::analysis(format!("channel `{label}` not in stream (channels: {})", known.join(", ")))
    })
}

fn cmd_analyze(ctx: &Context, a: &AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let inputs: Vec<(Option<f64>, PathBuf)> = if a.stream.is_empty() {
        read_manifest(&ctx.out_dir)?.into_iter().map(|(p, f)| (Some(p), f)).collect()
    } else {
        if !a.power_mw.is_empty() && a.power_mw.len() != a.stream.len() {
            return Err(Error::domain("--power-mw must list one power per --stream"));
        }
        a.stream.iter().enumerate().map(|(i, f)| (a.power_mw.get(i).copied(), f.clone())).collect()
    };
    let window_ps = match a.window_ps {
        Some(w) => w,
        None => ctx.config.window()?.window_ps,
    }
    .round() as u64;
    let delay = a.delay_ps.or(ctx.config.config.analysis.accidental_delay_ps.map(|d| d.round() as u64));
    let mode = delay.map(|offset_ps| AccidentalMode::Delayed { offset_ps }).unwrap_or_default();

    let mut coinc_rows = Vec::new();
    let mut herald_rows = Vec::new();
    let mut sweep_rows = Vec::new();
    let mut fit_points = Vec::new();
    for (power, file) in &inputs {
        let stream = arm_view(TimestampStream::load(file)?, [&a.signal_channel, &a.idler_channel]);
        let s = channel_id(&stream, &a.signal_channel)?;
        let i = channel_id(&stream, &a.idler_channel)?;
        let r = count_coincidences_with(&stream, s, i, window_ps, mode)?;
        let p = power.map(|p| p.to_string()).unwrap_or_default();
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        coinc_rows.push(format!("{p},{name},{}", r.to_csv_row()));
        herald_rows.push(herald_row(&p, &name, &r));
        if let (Some(pw), Ok(pgr)) = (power, pair_generation_rate(&r)) {
            fit_points.push((*pw, pgr));
        }
        for w in window_sweep(&stream, s, i, &sweep_windows(ctx))? {
            sweep_rows.push(format!("{p},{name},{}", w.to_csv_row()));
        }
    }
    let path = ctx.write_csv("coincidences.csv", &format!("power_mw,file,{}", CoincidenceResult::CSV_HEADER), &coinc_rows)?;
    report(out, &path)?;
    let path = ctx.write_csv("heralding.csv", HERALD_HEADER, &herald_rows)?;
    report(out, &path)?;
    if !sweep_rows.is_empty() {
        let path = ctx.write_csv("window_sweep.csv", &format!("power_mw,file,{}", CoincidenceResult::CSV_HEADER), &sweep_rows)?;
        report(out, &path)?;
    }
    let distinct = {
        let mut ps: Vec<f64> = fit_points.iter().map(|p| p.0).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        ps.len()
    };
    if distinct >= 2 {
        let fit = brightness_fit(&fit_points)?;
        let spec = ctx.config.crystal()?;
        let src = &ctx.config.config.source;
        let fwhm = emission_bandwidth(&spec, src.pump_nm, src.idler_nm)?;
        let sb = spectral_brightness(&fit, fwhm)?;
        writeln!(out, "brightness {:.4e} pairs/s/mW, SB {sb:.1} pairs/s/mW/GHz", fit.slope)?;
        let row = format!("{},{},{},{},{fwhm},{sb}", fit.points.len(), fit.slope, fit.intercept, fit.slope_stderr);
        let path = ctx.write_csv(
            "brightness.csv",
            "points,slope_hz_per_mw,intercept_hz,slope_stderr_hz_per_mw,fwhm_ghz,spectral_brightness",
            &[row],
        )?;
        report(out, &path)?;
    }
    Ok(())
}

fn sweep_windows(ctx: &Context) -> Vec<u64> {
    ctx.config.config.analysis.window_sweep_ps.iter().map(|w| w.round() as u64).collect()
}

pub const HERALD_HEADER: &str =
    "power_mw,file,singles_signal_hz,singles_idler_hz,true_hz,eta_signal,eta_idler,pgr_hz,negative_true";

fn herald_row(power: &str, file: &str, r: &CoincidenceResult) -> String {
    let (es, ei) = heralding(r).map(|h| (h.eta_signal.to_string(), h.eta_idler.to_string())).unwrap_or_default();
    let pgr = pair_generation_rate(r).map(|v| v.to_string()).unwrap_or_default();
    format!(
        "{power},{file},{},{},{},{es},{ei},{pgr},{}",
        r.singles_rate_a(),
        r.singles_rate_b(),
        r.true_rate(),
        r.negative_true
    )
}

fn cmd_scan(ctx: &Context, a: &ScanArgs, out: &mut dyn Write) -> Result<()> {
    let an = &ctx.config.config.analysis;
    let fwhm = match a.fwhm_ghz {
        Some(f) => f,
        None => {
            let src = &ctx.config.config.source;
            emission_bandwidth(&ctx.config.crystal()?, src.pump_nm, src.idler_nm)?
        }
    };
    let filter = a.filter_ghz.unwrap_or(an.filter_fwhm_ghz);
    let step = a.step_ghz.unwrap_or(an.scan_step_ghz);
    let half = a.half_span_ghz.unwrap_or(an.scan_half_span_ghz);
    if !(step > 0.0 && half > 0.0) {
        return Err(Error::domain("scan step and span must be > 0"));
    }
    // Line sampled well beyond the scan so the sinc² side lobes are kept.
    let line_half = (20.0 * fwhm).max(half + 5.0 * filter);
    let line = SpectralLine::sinc2(0.0, fwhm, line_half, ((2.0 * line_half / (fwhm / 100.0)) as usize).max(2001) | 1)?;
    let n = (2.0 * half / step).round() as usize;
    let centers: Vec<f64> = (0..=n).map(|i| -half + i as f64 * step).collect();
    let scan = filter_scan(&line, filter, &centers)?;
    let corrected = deconvolve_fwhm(scan.line.fwhm_ghz, filter)?;
    writeln!(
        out,
        "line {fwhm:.3} GHz through {filter} GHz filter: scan FWHM {:.3} GHz, deconvolved {corrected:.3} GHz{}",
        scan.line.fwhm_ghz,
        if scan.undersampled { " (undersampled grid)" } else { "" }
    )?;
    let rows: Vec<String> = scan.line.samples.iter().map(|(c, v)| format!("{c},{v}")).collect();
    let path = ctx.write_csv("scan_filter.csv", "detuning_ghz,transmitted", &rows)?;
    report(out, &path)?;
    let summary = format!("{fwhm},{filter},{},{corrected},{}", scan.line.fwhm_ghz, scan.undersampled);
    let path = ctx.write_csv(
        "scan_filter_summary.csv",
        "line_fwhm_ghz,filter_fwhm_ghz,scan_fwhm_ghz,deconvolved_fwhm_ghz,undersampled",
        &[summary],
    )?;
    report(out, &path)
}

fn cmd_deconvolve(ctx: &Context, a: &DeconvolveArgs, out: &mut dyn Write) -> Result<()> {
    let fwhm = deconvolve_fwhm(a.measured_ghz, a.filter_ghz).map_err(|e| match e {
        // A filter-limited measurement is bad input, not a runtime failure.
        Error::Analysis(m) => Error::Domain(m),
        e => e,
    })?;
    writeln!(out, "corrected FWHM: {fwhm:.1} GHz")?;
    let path = ctx.write_csv(
        "deconvolve.csv",
        "measured_fwhm_ghz,filter_fwhm_ghz,corrected_fwhm_ghz",
        &[format!("{},{},{fwhm}", a.measured_ghz, a.filter_ghz)],
    )?;
    report(out, &path)
}

/// PAM channel pairs for the four cells of one basis.
fn pam_cells(stream: &TimestampStream, basis: Basis) -> Result<[(u8, u8); 4]> {
    let (a, b) = match basis {
        Basis::HV => ("H", "V"),
        Basis::DA => ("D", "A"),
    };
    let ch = |arm: &str, o: &str| channel_id(stream, &format!("{arm}_{o}"));
    Ok([
        (ch("signal", a)?, ch("idler", a)?),
        (ch("signal", a)?, ch("idler", b)?),
        (ch("signal", b)?, ch("idler", a)?),
        (ch("signal", b)?, ch("idler", b)?),
    ])
}

/// Correlation tables for both bases from a PAM stream.
pub fn pam_tables(stream: &TimestampStream, window_ps: u64) -> Result<Vec<CorrelationTable>> {
    [Basis::HV, Basis::DA]
        .into_iter()
        .map(|basis| {
            let mut counts = [0u64; 4];
            let mut acc = [0f64; 4];
            for (k, (s, i)) in pam_cells(stream, basis)?.into_iter().enumerate() {
                let r = crate::analysis::count_coincidences(stream, s, i, window_ps)?;
                counts[k] = r.coincidences;
                acc[k] = r.accidentals_estimate;
            }
            let mut t = CorrelationTable::new(basis, counts).with_accidentals(acc)?;
            t.integration_s = stream.duration_s;
            Ok(t)
        })
        .collect()
}

fn cmd_polarization(ctx: &Context, a: &PolarizationArgs, out: &mut dyn Write) -> Result<()> {
    let tables = match &a.tables {
        Some(path) => CorrelationTable::read_csv(&std::fs::read_to_string(path)?)?,
        None => {
            let setup = ctx
                .config
                .polarization_setup()?
                .ok_or_else(|| Error::domain("config has no [polarization] section; pass --tables"))?;
            if setup.analyzer != AnalyzerSettings::Pam {
                return Err(Error::domain("polarization analysis needs analyzer = \"pam\""));
            }
            let mut cfg = ctx.config.sim_config(a.power_mw.unwrap_or(ctx.config.simulation_power_mw()), ctx.seed)?;
            cfg.polarization = Some(setup);
            if let Some(d) = a.duration_s {
                cfg.duration_s = d;
            }
            let stream = simulate_with_stats(&cfg)?.0;
            let window = ctx.config.window()?.window_ps.round() as u64;
            let tables = pam_tables(&stream, window)?;
            let rows: Vec<String> = tables.iter().map(CorrelationTable::to_csv_row).collect();
            let path = ctx.write_csv("correlation_tables.csv", CorrelationTable::CSV_HEADER, &rows)?;
            report(out, &path)?;
            tables
        }
    };
    let resamples = ctx.config.config.analysis.bootstrap_resamples_count.max(2);
    let mut rows = Vec::new();
    let mut by_basis = [None, None];
    for (k, t) in tables.iter().enumerate() {
        let v = visibility(t)?;
        let raw = visibility(&CorrelationTable { accidentals: None, ..t.clone() })?;
        let delta = uncertainty(t)?;
        let boot = bootstrap_uncertainty(t, resamples, ctx.seed.wrapping_add(k as u64))?;
        let (_, negative) = t.corrected();
        rows.push(format!("{},{v},{raw},{},{boot},{},{negative}", t.basis, delta.std_err, delta.boundary_degenerate));
        by_basis[if t.basis == Basis::HV { 0 } else { 1 }] = Some(v);
        writeln!(out, "V_{} = {v:.4} ± {:.4} (delta) / {boot:.4} (bootstrap)", t.basis, delta.std_err)?;
    }
    let path = ctx.write_csv(
        "visibility.csv",
        "basis,visibility,raw_visibility,stderr_delta,stderr_bootstrap,boundary_degenerate,negative_corrected",
        &rows,
    )?;
    report(out, &path)?;
    if let [Some(hv), Some(da)] = by_basis {
        let f = fidelity_bound(hv, da);
        writeln!(out, "fidelity >= {f:.4}")?;
        let path = ctx.write_csv("fidelity.csv", "v_hv,v_da,fidelity_bound", &[format!("{hv},{da},{f}")])?;
        report(out, &path)?;
    }
    if let Some(p) = &ctx.config.config.polarization {
        let n = p.phase_grid_count.max(2);
        let phases: Vec<f64> = (0..n).map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64).collect();
        let state = ctx.config.polarization_setup()?.map(|s| s.state).unwrap_or_default();
        let rows: Vec<String> = visibility_vs_phase(&state, &phases)
            .iter()
            .map(|pt| format!("{},{},{}", pt.phase_rad, pt.v_hv, pt.v_da))
            .collect();
        let path = ctx.write_csv("visibility_vs_phase.csv", "phase_rad,v_hv,v_da", &rows)?;
        report(out, &path)?;
    }
    Ok(())
}
