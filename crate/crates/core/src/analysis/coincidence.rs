//! Two-channel coincidence counting.
//!
//! A pair (a, b) is coincident when |t_a − t_b| ≤ Δt/2. Events are matched
//! one-to-one, greedily and earliest-first while scanning in time order:
//! each arriving event takes the oldest still-open event of the other
//! channel. Only events younger than Δt/2 are kept, so memory follows the
//! window occupancy rather than the stream length.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::stream::{Event, TimestampStream};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AccidentalMode {
    /// S_a · S_b · Δt from the measured singles rates.
    #[default]
    Singles,
    /// Count coincidences again with channel b delayed by `offset_ps`.
    Delayed { offset_ps: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceResult {
    pub window_ps: u64,
    pub channel_a: u8,
    pub channel_b: u8,
    pub singles_a: u64,
    pub singles_b: u64,
    pub coincidences: u64,
    pub accidentals_estimate: f64,
    /// coincidences − accidentals; may be negative, see `negative_true`.
    pub true_estimate: f64,
    pub negative_true: bool,
    pub duration_s: f64,
}

impl CoincidenceResult {
    fn build(
        window_ps: u64,
        (channel_a, channel_b): (u8, u8),
        (singles_a, singles_b): (u64, u64),
        coincidences: u64,
        accidentals_estimate: f64,
        duration_s: f64,
    ) -> Self {
        let true_estimate = coincidences as f64 - accidentals_estimate;
        CoincidenceResult {
            window_ps,
            channel_a,
            channel_b,
            singles_a,
            singles_b,
            coincidences,
            accidentals_estimate,
            true_estimate,
            negative_true: true_estimate < 0.0,
            duration_s,
        }
    }

    pub fn singles_rate_a(&self) -> f64 {
        self.singles_a as f64 / self.duration_s
    }

    pub fn singles_rate_b(&self) -> f64 {
        self.singles_b as f64 / self.duration_s
    }

    pub fn coincidence_rate(&self) -> f64 {
        self.coincidences as f64 / self.duration_s
    }

    pub fn true_rate(&self) -> f64 {
        self.true_estimate / self.duration_s
    }

    pub fn accidental_rate(&self) -> f64 {
        self.accidentals_estimate / self.duration_s
    }

    pub const CSV_HEADER: &'static str = "window_ps,channel_a,channel_b,singles_a,singles_b,coincidences,\
accidentals,true_estimate,negative_true,duration_s";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.window_ps,
            self.channel_a,
            self.channel_b,
            self.singles_a,
            self.singles_b,
            self.coincidences,
            self.accidentals_estimate,
            self.true_estimate,
            self.negative_true,
            self.duration_s
        )
    }
}

/// Incremental matcher. Feed events in nondecreasing time order; events on
/// other channels are ignored.
#[derive(Debug, Clone)]
pub struct CoincidenceCounter {
    channel_a: u8,
    channel_b: u8,
    half_window: u64,
    matching: bool,
    open_a: VecDeque<u64>,
    open_b: VecDeque<u64>,
    last_time: Option<u64>,
    pub singles_a: u64,
    pub singles_b: u64,
    pub coincidences: u64,
}

impl CoincidenceCounter {
    /// `window_ps` is the full width Δt. A zero window never matches, even
    /// for identical timestamps.
    pub fn new(channel_a: u8, channel_b: u8, window_ps: u64) -> Result<Self> {
        if channel_a == channel_b {
            return Err(Error::analysis("coincidence channels must differ"));
        }
        Ok(CoincidenceCounter {
            channel_a,
            channel_b,
            half_window: window_ps / 2,
            matching: window_ps > 0,
            open_a: VecDeque::new(),
            open_b: VecDeque::new(),
            last_time: None,
            singles_a: 0,
            singles_b: 0,
            coincidences: 0,
        })
    }

    /// Events kept open for matching; bounded by the window occupancy.
    pub fn occupancy(&self) -> usize {
        self.open_a.len() + self.open_b.len()
    }

    pub fn push(&mut self, event: Event) -> Result<()> {
        if self.last_time.is_some_and(|last| event.time_ps < last) {
            return Err(Error::analysis(format!(
                "stream not sorted: {} ps follows {} ps",
                event.time_ps,
                self.last_time.unwrap_or(0)
            )));
        }
        self.last_time = Some(event.time_ps);
        let is_a = if event.channel == self.channel_a {
            self.singles_a += 1;
            true
        } else if event.channel == self.channel_b {
            self.singles_b += 1;
            false
        } else {
            return Ok(());
        };
        if !self.matching {
            return Ok(());
        }
        let t = event.time_ps;
        let horizon = t.saturating_sub(self.half_window);
        let (own, other) = if is_a {
            (&mut self.open_a, &mut self.open_b)
        } else {
            (&mut self.open_b, &mut self.open_a)
        };
        while other.front().is_some_and(|&u| u < horizon) {
            other.pop_front();
        }
        while own.front().is_some_and(|&u| u < horizon) {
            own.pop_front();
        }
        if other.pop_front().is_some() {
            self.coincidences += 1;
        } else {
            own.push_back(t);
        }
        Ok(())
    }
}

fn check_channels(stream: &TimestampStream, a: u8, b: u8) -> Result<()> {
    for ch in [a, b] {
        if !stream.channel_map.contains_key(&ch) {
            return Err(Error::analysis(format!("channel {ch} not declared in the stream")));
        }
    }
    Ok(())
}

fn scan<I: IntoIterator<Item = Event>>(events: I, a: u8, b: u8, window_ps: u64) -> Result<CoincidenceCounter> {
    let mut counter = CoincidenceCounter::new(a, b, window_ps)?;
    for e in events {
        counter.push(e)?;
    }
    Ok(counter)
}

/// Channel a as recorded merged with channel b shifted later by `offset`.
fn delayed_events(stream: &TimestampStream, a: u8, b: u8, offset: u64) -> impl Iterator<Item = Event> + '_ {
    let mut xs = stream.events.iter().filter(move |e| e.channel == a).copied().peekable();
    let mut ys = stream
        .events
        .iter()
        .filter(move |e| e.channel == b)
        .map(move |e| Event { channel: b, time_ps: e.time_ps + offset })
        .peekable();
    std::iter::from_fn(move || match (xs.peek(), ys.peek()) {
        (Some(x), Some(y)) if y.time_ps < x.time_ps => ys.next(),
        (Some(_), _) => xs.next(),
        (None, _) => ys.next(),
    })
}

/// Coincidences with accidentals from the singles rates.
pub fn count_coincidences(stream: &TimestampStream, channel_a: u8, channel_b: u8, window_ps: u64) -> Result<CoincidenceResult> {
    count_coincidences_with(stream, channel_a, channel_b, window_ps, AccidentalMode::Singles)
}

pub fn count_coincidences_with(
    stream: &TimestampStream,
    channel_a: u8,
    channel_b: u8,
    window_ps: u64,
    mode: AccidentalMode,
) -> Result<CoincidenceResult> {
    check_channels(stream, channel_a, channel_b)?;
    if !(stream.duration_s > 0.0) {
        return Err(Error::analysis("stream duration must be > 0"));
    }
    let c = scan(stream.events.iter().copied(), channel_a, channel_b, window_ps)?;
    let accidentals = match mode {
        AccidentalMode::Singles => {
            let ra = c.singles_a as f64 / stream.duration_s;
            let rb = c.singles_b as f64 / stream.duration_s;
            ra * rb * window_ps as f64 * 1e-12 * stream.duration_s
        }
        AccidentalMode::Delayed { offset_ps } => {
            if offset_ps <= window_ps {
                return Err(Error::analysis("delay offset must exceed the window"));
            }
            scan(delayed_events(stream, channel_a, channel_b, offset_ps), channel_a, channel_b, window_ps)?.coincidences as f64
        }
    };
    Ok(CoincidenceResult::build(
        window_ps,
        (channel_a, channel_b),
        (c.singles_a, c.singles_b),
        c.coincidences,
        accidentals,
        stream.duration_s,
    ))
}

/// Counts consecutive `chunk_ps` slices independently and sums them.
///
/// Pairs straddling a slice boundary are lost, so the total never exceeds
/// the whole-stream count and falls short by at most the number of channel-a
/// events within Δt/2 of a boundary: one per boundary when the window rarely
/// holds more than one event. Accidentals use the summed singles.
pub fn count_coincidences_chunked(
    stream: &TimestampStream,
    channel_a: u8,
    channel_b: u8,
    window_ps: u64,
    chunk_ps: u64,
) -> Result<CoincidenceResult> {
    check_channels(stream, channel_a, channel_b)?;
    if chunk_ps == 0 {
        return Err(Error::analysis("chunk length must be > 0"));
    }
    if !stream.events.is_sorted_by_key(|e| e.time_ps) {
        return Err(Error::analysis("stream not sorted"));
    }
    if !(stream.duration_s > 0.0) {
        return Err(Error::analysis("stream duration must be > 0"));
    }
    let (mut sa, mut sb, mut cc) = (0u64, 0u64, 0u64);
    let mut rest = &stream.events[..];
    while !rest.is_empty() {
        let start = rest[0].time_ps / chunk_ps * chunk_ps;
        let n = rest.partition_point(|e| e.time_ps < start + chunk_ps);
        let c = scan(rest[..n].iter().copied(), channel_a, channel_b, window_ps)?;
        sa += c.singles_a;
        sb += c.singles_b;
        cc += c.coincidences;
        rest = &rest[n..];
    }
    let t = stream.duration_s;
    let accidentals = (sa as f64 / t) * (sb as f64 / t) * window_ps as f64 * 1e-12 * t;
    Ok(CoincidenceResult::build(window_ps, (channel_a, channel_b), (sa, sb), cc, accidentals, t))
}

/// One result per window; windows must be ascending.
pub fn window_sweep(stream: &TimestampStream, channel_a: u8, channel_b: u8, windows_ps: &[u64]) -> Result<Vec<CoincidenceResult>> {
    if windows_ps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::analysis("window list must be sorted ascending"));
    }
    windows_ps.iter().map(|&w| count_coincidences(stream, channel_a, channel_b, w)).collect()
}
