//! Detection timestamp streams and their on-disk formats.
//!
//! Both formats share a header block of `#`-prefixed `key=value` lines:
//!
//! ```text
//! # pairsource timestamp stream
//! # duration_s=0.5
//! # seed=42
//! # generator=ChaCha8Rng
//! # channel_map=0:signal;1:idler
//! ```
//!
//! * text: the header, then one `channel,time_ps` line per event;
//! * binary: magic `QTT1`, header length as little-endian `u32`, the header
//!   bytes, then 9-byte records (`u8` channel, little-endian `u64` time in ps).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QTT1";
const TITLE: &str = "pairsource timestamp stream";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub channel: u8,
    pub time_ps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Pair,
    Dark,
    Afterpulse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimestampStream {
    pub events: Vec<Event>,
    /// Per-event origin, only recorded in debug simulations.
    pub origins: Option<Vec<Origin>>,
    pub duration_s: f64,
    pub channel_map: BTreeMap<u8, String>,
    pub seed: Option<u64>,
    pub generator: String,
}

impl TimestampStream {
    pub fn new(duration_s: f64, channel_map: BTreeMap<u8, String>) -> Self {
        TimestampStream {
            events: Vec::new(),
            origins: None,
            duration_s,
            channel_map,
            seed: None,
            generator: String::from("external"),
        }
    }

    pub fn channel(&self, label: &str) -> Option<u8> {
        self.channel_map.iter().find(|(_, l)| l.as_str() == label).map(|(c, _)| *c)
    }

    pub fn count(&self, channel: u8) -> u64 {
        self.events.iter().filter(|e| e.channel == channel).count() as u64
    }

    pub fn times(&self, channel: u8) -> impl Iterator<Item = u64> + '_ {
        self.events.iter().filter(move |e| e.channel == channel).map(|e| e.time_ps)
    }

    /// Index of the first event that breaks time ordering, if any.
    pub fn first_unsorted(&self) -> Option<usize> {
        self.events.windows(2).position(|w| w[1].time_ps < w[0].time_ps).map(|i| i + 1)
    }

    /// Checks that channels are declared and times lie in `[0, duration]`.
    pub fn validate(&self) -> Result<()> {
        let end = crate::units::s_to_ps(self.duration_s);
        for (i, e) in self.events.iter().enumerate() {
            if !self.channel_map.contains_key(&e.channel) {
                return Err(Error::Format(format!("event {i}: undeclared channel {}", e.channel)));
            }
            if e.time_ps > end {
                return Err(Error::Format(format!("event {i}: time {} ps beyond duration", e.time_ps)));
            }
        }
        Ok(())
    }

    /// Events with `start <= t < end`, durations adjusted.
    pub fn slice(&self, start_ps: u64, end_ps: u64) -> TimestampStream {
        let events: Vec<Event> = self
            .events
            .iter()
            .filter(|e| e.time_ps >= start_ps && e.time_ps < end_ps)
            .map(|e| Event { channel: e.channel, time_ps: e.time_ps - start_ps })
            .collect();
        TimestampStream {
            events,
            origins: None,
            duration_s: (end_ps - start_ps) as f64 * 1e-12,
            channel_map: self.channel_map.clone(),
            seed: self.seed,
            generator: self.generator.clone(),
        }
    }

    pub fn header(&self) -> String {
        let mut h = String::new();
        let _ = writeln!(h, "# {TITLE}");
        let _ = writeln!(h, "# duration_s={}", self.duration_s);
        if let Some(seed) = self.seed {
            let _ = writeln!(h, "# seed={seed}");
        }
        let _ = writeln!(h, "# generator={}", self.generator);
        let map: Vec<String> = self.channel_map.iter().map(|(c, l)| format!("{c}:{l}")).collect();
        let _ = writeln!(h, "# channel_map={}", map.join(";"));
        h
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.header().as_bytes())?;
        let mut line = String::with_capacity(32);
        for e in &self.events {
            line.clear();
            let _ = writeln!(line, "{},{}", e.channel, e.time_ps);
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = self.header();
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        let mut rec = [0u8; 9];
        for e in &self.events {
            rec[0] = e.channel;
            rec[1..].copy_from_slice(&e.time_ps.to_le_bytes());
            w.write_all(&rec)?;
        }
        Ok(())
    }

    pub fn read_text(text: &str) -> Result<TimestampStream> {
        let mut header = String::new();
        let mut events = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('#') {
                header.push_str(line);
                header.push('\n');
                continue;
            }
            let (ch, t) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("line {}: expected `channel,time_ps`", idx + 1)))?;
            let channel = ch
                .trim()
                .parse::<u8>()
                .map_err(|_| Error::Format(format!("line {}: bad channel `{ch}`", idx + 1)))?;
            let time_ps = t
                .trim()
                .parse::<u64>()
                .map_err(|_| Error::Format(format!("line {}: bad timestamp `{t}`", idx + 1)))?;
            events.push(Event { channel, time_ps });
        }
        let mut stream = Self::from_header(&header)?;
        stream.events = events;
        stream.validate()?;
        Ok(stream)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<TimestampStream> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("missing QTT1 magic".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let header = String::from_utf8(header).map_err(|_| Error::Format("header is not UTF-8".into()))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() % 9 != 0 {
            return Err(Error::Format(format!("truncated record: {} trailing bytes", body.len() % 9)));
        }
        let mut stream = Self::from_header(&header)?;
        stream.events = body
            .chunks_exact(9)
            .map(|rec| Event {
                channel: rec[0],
                time_ps: u64::from_le_bytes(rec[1..9].try_into().expect("8 bytes")),
            })
            .collect();
        stream.validate()?;
        Ok(stream)
    }

    fn from_header(header: &str) -> Result<TimestampStream> {
        let mut duration = None;
        let mut seed = None;
        let mut generator = String::from("external");
        let mut channel_map = BTreeMap::new();
        for line in header.lines() {
            let body = line.trim_start_matches('#').trim();
            let Some((key, value)) = body.split_once('=') else { continue };
            match key.trim() {
                "duration_s" => {
                    duration = Some(value.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad duration `{value}`")))?)
                }
                "seed" => seed = Some(value.trim().parse::<u64>().map_err(|_| Error::Format(format!("bad seed `{value}`")))?),
                "generator" => generator = value.trim().to_string(),
                "channel_map" => {
                    for entry in value.split(';').filter(|s| !s.trim().is_empty()) {
                        let (c, l) = entry
                            .split_once(':')
                            .ok_or_else(|| Error::Format(format!("bad channel_map entry `{entry}`")))?;
                        let c = c.trim().parse::<u8>().map_err(|_| Error::Format(format!("bad channel id `{c}`")))?;
                        channel_map.insert(c, l.trim().to_string());
                    }
                }
                _ => {}
            }
        }
        let duration_s = duration.ok_or_else(|| Error::Format("header lacks duration_s".into()))?;
        if !(duration_s > 0.0) {
            return Err(Error::Format("duration_s must be positive".into()));
        }
        Ok(TimestampStream { events: Vec::new(), origins: None, duration_s, channel_map, seed, generator })
    }

    /// Writes binary for `.qtt`/`.bin` paths and text otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        if is_binary_path(path) {
            self.write_binary(file)
        } else {
            self.write_text(file)
        }
    }

    /// Reads either format, recognising binary by its magic bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<TimestampStream> {
        let bytes = std::fs::read(path.as_ref())?;
        if bytes.starts_with(MAGIC) {
            Self::read_binary(bytes.as_slice())
        } else {
            let text = String::from_utf8(bytes).map_err(|_| Error::Format("stream is neither QTT1 nor UTF-8 text".into()))?;
            Self::read_text(&text)
        }
    }
}

fn is_binary_path(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("qtt") | Some("bin"))
}
