//! Monte Carlo generation of detection timestamp streams.
//!
//! Pipeline: Poisson pair emission → per-arm survival → optional
//! polarization projection onto analyzer outputs → Gaussian jitter per
//! detector → Poisson dark counts → non-paralyzable dead time with
//! afterpulse cascades → time-ordered merge.
//!
//! Randomness comes from ChaCha8 with one independent stream per role
//! (emission, routing, each arm, each detector channel), all derived from
//! the configured seed.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::detection::ArmBudget;
use crate::error::{Error, Result};
use crate::polarization::{outcome_probabilities, Basis, EntangledStateModel};
use crate::stream::{Event, Origin, TimestampStream};
use crate::units::{ns_to_ps, s_to_ps, PS_PER_S};

pub const GENERATOR_ID: &str = "ChaCha8Rng(stream-per-role)";
pub const AFTERPULSE_DEPTH_CAP: u8 = 10;
pub const DEFAULT_MAX_EVENTS: u64 = 50_000_000;

const STREAM_EMISSION: u64 = 0;
const STREAM_ROUTING: u64 = 1;
const STREAM_ARM_SIGNAL: u64 = 2;
const STREAM_ARM_IDLER: u64 = 3;
const STREAM_CHANNEL_BASE: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyzerSettings {
    /// 50/50 choice of H/V or D/A per pair; four outputs per arm.
    Pam,
    /// Fixed linear analyzers with two outputs (θ, θ + 90°) per arm.
    Fixed { signal_rad: f64, idler_rad: f64 },
}

/// Slow sinusoidal rotation of the idler polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationDrift {
    pub amplitude_rad: f64,
    pub period_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationSetup {
    pub state: EntangledStateModel,
    pub analyzer: AnalyzerSettings,
    pub drift: Option<PolarizationDrift>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub pgr_hz: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub signal: ArmBudget,
    pub idler: ArmBudget,
    pub polarization: Option<PolarizationSetup>,
    /// Refuse runs whose expected event count exceeds this.
    pub max_events: u64,
    pub record_origins: bool,
}

impl SimConfig {
    pub fn new(pgr_hz: f64, duration_s: f64, seed: u64, signal: ArmBudget, idler: ArmBudget) -> Self {
        SimConfig {
            pgr_hz,
            duration_s,
            seed,
            signal,
            idler,
            polarization: None,
            max_events: DEFAULT_MAX_EVENTS,
            record_origins: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::domain(format!("duration must be > 0, got {} s", self.duration_s)));
        }
        if !(self.pgr_hz >= 0.0 && self.pgr_hz.is_finite()) {
            return Err(Error::domain(format!("pair rate must be >= 0, got {} Hz", self.pgr_hz)));
        }
        self.signal.detector.validate()?;
        self.idler.detector.validate()?;
        if let Some(PolarizationSetup { drift: Some(d), .. }) = &self.polarization {
            if !(d.period_s > 0.0) {
                return Err(Error::domain("drift period must be > 0"));
            }
        }
        Ok(())
    }

    /// Channel ids with their labels and arm, in id order.
    pub fn channel_layout(&self) -> Vec<(u8, String, Arm)> {
        let outputs: Vec<&str> = match self.polarization.map(|p| p.analyzer) {
            None => vec![""],
            Some(AnalyzerSettings::Pam) => vec!["H", "V", "D", "A"],
            Some(AnalyzerSettings::Fixed { .. }) => vec!["a", "b"],
        };
        let mut out = Vec::new();
        for (arm, name) in [(Arm::Signal, "signal"), (Arm::Idler, "idler")] {
            for o in &outputs {
                let label = if o.is_empty() { name.to_string() } else { format!("{name}_{o}") };
                out.push((out.len() as u8, label, arm));
            }
        }
        out
    }

    fn expected_events(&self) -> f64 {
        let per_arm = self.channel_layout().len() as f64 / 2.0;
        let arm = |b: &ArmBudget| {
            (self.pgr_hz * b.eta_static + per_arm * b.detector.dark_rate_hz) * (1.0 + b.detector.afterpulse_prob)
        };
        self.duration_s * (arm(&self.signal) + arm(&self.idler))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Signal,
    Idler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChannelStats {
    pub channel: u8,
    /// Photon and dark arrivals before dead time.
    pub offered: u64,
    /// Photon and dark arrivals that found the detector live.
    pub accepted_primary: u64,
    pub accepted_afterpulses: u64,
}

impl ChannelStats {
    /// Accepted / offered primary arrivals.
    pub fn livetime(&self) -> f64 {
        if self.offered == 0 {
            1.0
        } else {
            self.accepted_primary as f64 / self.offered as f64
        }
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates one run and returns the merged stream.
pub fn simulate(cfg: &SimConfig) -> Result<TimestampStream> {
    simulate_with_stats(cfg).map(|(s, _)| s)
}

struct Arrival {
    time_ps: u64,
    origin: Origin,
}

pub fn simulate_with_stats(cfg: &SimConfig) -> Result<(TimestampStream, Vec<ChannelStats>)> {
    cfg.validate()?;
    let expected = cfg.expected_events();
    if expected > cfg.max_events as f64 {
        return Err(Error::Simulation(format!(
            "expected {expected:.3e} events exceeds the cap of {} events; \
             split the run into shorter chunks and simulate each separately",
            cfg.max_events
        )));
    }

    let layout = cfg.channel_layout();
    let end_ps = s_to_ps(cfg.duration_s);
    let mut raw: Vec<Vec<Arrival>> = layout.iter().map(|_| Vec::new()).collect();
    emit_pairs(cfg, end_ps, &mut raw)?;

    let mut per_channel = Vec::with_capacity(layout.len());
    let mut stats = Vec::with_capacity(layout.len());
    for ((channel, _, arm), arrivals) in layout.iter().zip(raw) {
        let budget = match arm {
            Arm::Signal => &cfg.signal,
            Arm::Idler => &cfg.idler,
        };
        let mut rng = substream(cfg.seed, STREAM_CHANNEL_BASE + *channel as u64);
        let (events, st) = detect_channel(*channel, arrivals, budget, end_ps, &mut rng)?;
        per_channel.push(events);
        stats.push(st);
    }

    // Channels are concatenated in id order, so a stable sort on time breaks
    // ties by channel id, then by insertion order.
    let mut merged: Vec<(Event, Origin)> = per_channel.into_iter().flatten().collect();
    merged.sort_by_key(|(e, _)| e.time_ps);

    let channel_map: BTreeMap<u8, String> = layout.iter().map(|(c, l, _)| (*c, l.clone())).collect();
    let origins = cfg.record_origins.then(|| merged.iter().map(|(_, o)| *o).collect());
    let stream = TimestampStream {
        events: merged.into_iter().map(|(e, _)| e).collect(),
        origins,
        duration_s: cfg.duration_s,
        channel_map,
        seed: Some(cfg.seed),
        generator: GENERATOR_ID.to_string(),
    };
    Ok((stream, stats))
}

fn jittered(t_ps: f64, jitter: Option<&Normal<f64>>, rng: &mut ChaCha8Rng, end_ps: u64) -> Option<u64> {
    let t = match jitter {
        Some(n) => t_ps + n.sample(rng),
        None => t_ps,
    }
    .round();
    (t >= 0.0 && t <= end_ps as f64).then_some(t as u64)
}

fn emit_pairs(cfg: &SimConfig, end_ps: u64, raw: &mut [Vec<Arrival>]) -> Result<()> {
    if cfg.pgr_hz == 0.0 {
        return Ok(());
    }
    let mut emission = substream(cfg.seed, STREAM_EMISSION);
    let mut routing = substream(cfg.seed, STREAM_ROUTING);
    let mut rng_s = substream(cfg.seed, STREAM_ARM_SIGNAL);
    let mut rng_i = substream(cfg.seed, STREAM_ARM_IDLER);

    let gap = Exp::new(cfg.pgr_hz / PS_PER_S).map_err(|e| Error::Simulation(e.to_string()))?;
    let normal = |b: &ArmBudget| {
        let sigma = b.detector.jitter_sigma_ps();
        (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"))
    };
    let jitter_s = normal(&cfg.signal);
    let jitter_i = normal(&cfg.idler);
    let outputs_per_arm = raw.len() / 2;

    let mut t = 0.0f64;
    loop {
        t += gap.sample(&mut emission);
        if t > end_ps as f64 {
            break;
        }
        let (out_s, out_i) = match &cfg.polarization {
            None => (0, 0),
            Some(setup) => route(setup, t, &mut routing),
        };
        if rng_s.random::<f64>() < cfg.signal.eta_static {
            if let Some(ts) = jittered(t, jitter_s.as_ref(), &mut rng_s, end_ps) {
                raw[out_s].push(Arrival { time_ps: ts, origin: Origin::Pair });
            }
        }
        if rng_i.random::<f64>() < cfg.idler.eta_static {
            if let Some(ti) = jittered(t, jitter_i.as_ref(), &mut rng_i, end_ps) {
                raw[outputs_per_arm + out_i].push(Arrival { time_ps: ti, origin: Origin::Pair });
            }
        }
    }
    Ok(())
}

/// Analyzer output index per arm for one pair.
fn route(setup: &PolarizationSetup, t_ps: f64, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let drift = setup
        .drift
        .map(|d| d.amplitude_rad * (2.0 * PI * t_ps / (d.period_s * PS_PER_S)).sin())
        .unwrap_or(0.0);
    let (theta_s, theta_i, offset) = match setup.analyzer {
        AnalyzerSettings::Pam => {
            let basis = if rng.random_bool(0.5) { Basis::HV } else { Basis::DA };
            let a = basis.analyzer_angle();
            (a, a, if basis == Basis::HV { 0 } else { 2 })
        }
        AnalyzerSettings::Fixed { signal_rad, idler_rad } => (signal_rad, idler_rad, 0),
    };
    let probs = outcome_probabilities(&setup.state, theta_s, theta_i + drift);
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut k = 3;
    for (idx, p) in probs.iter().enumerate() {
        if u < *p {
            k = idx;
            break;
        }
        u -= p;
    }
    (offset + k / 2, offset + k % 2)
}

fn detect_channel(
    channel: u8,
    mut arrivals: Vec<Arrival>,
    budget: &ArmBudget,
    end_ps: u64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<(Event, Origin)>, ChannelStats)> {
    let det = &budget.detector;
    if det.dark_rate_hz > 0.0 {
        let gap = Exp::new(det.dark_rate_hz / PS_PER_S).map_err(|e| Error::Simulation(e.to_string()))?;
        let mut t = 0.0f64;
        loop {
            t += gap.sample(rng);
            if t > end_ps as f64 {
                break;
            }
            arrivals.push(Arrival { time_ps: t.round() as u64, origin: Origin::Dark });
        }
    }
    arrivals.sort_by_key(|a| a.time_ps);

    let dead_ps = ns_to_ps(det.dead_time_ns);
    let afterpulse_delay = (det.afterpulse_prob > 0.0 && det.afterpulse_tau_ns > 0.0)
        .then(|| Exp::new(1.0 / (det.afterpulse_tau_ns * 1e3)).expect("positive rate"));

    let mut stats = ChannelStats { channel, offered: arrivals.len() as u64, ..Default::default() };
    let mut out = Vec::with_capacity(arrivals.len());
    // Pending afterpulses: (time, sequence, depth)
    let mut pending: BinaryHeap<Reverse<(u64, u64, u8)>> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut last: Option<u64> = None;
    let mut next = arrivals.into_iter().peekable();

    loop {
        let take_afterpulse = match (next.peek(), pending.peek()) {
            (None, None) => break,
            (Some(_), None) => false,
            (None, Some(_)) => true,
            (Some(a), Some(Reverse((t, _, _)))) => *t < a.time_ps,
        };
        let (time_ps, origin, depth) = if take_afterpulse {
            let Reverse((t, _, d)) = pending.pop().expect("peeked");
            (t, Origin::Afterpulse, d)
        } else {
            let a = next.next().expect("peeked");
            (a.time_ps, a.origin, 0)
        };
        let live = last.is_none_or(|l| time_ps - l >= dead_ps);
        if !live {
            continue;
        }
        last = Some(time_ps);
        out.push((Event { channel, time_ps }, origin));
        if origin == Origin::Afterpulse {
            stats.accepted_afterpulses += 1;
        } else {
            stats.accepted_primary += 1;
        }
        if depth < AFTERPULSE_DEPTH_CAP && det.afterpulse_prob > 0.0 && rng.random::<f64>() < det.afterpulse_prob {
            let delay = afterpulse_delay.as_ref().map(|d| d.sample(rng)).unwrap_or(0.0);
            let t = time_ps + dead_ps + delay.round() as u64;
            if t <= end_ps {
                pending.push(Reverse((t, seq, depth + 1)));
                seq += 1;
            }
        }
    }
    Ok((out, stats))
}
