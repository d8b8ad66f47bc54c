use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const EVENTS_CSV_HEADER: &str = "t_us,x,y,p";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Off => -1,
            Polarity::On => 1,
        }
    }

    pub fn from_sign(sign: f64) -> Polarity {
        if sign < 0.0 {
            Polarity::Off
        } else {
            Polarity::On
        }
    }

    /// On-disk encoding, `0` for OFF and `1` for ON.
    pub fn bit(self) -> u8 {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub t_us: u64,
    pub x: u32,
    pub y: u32,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t_us: u64, x: u32, y: u32, polarity: Polarity) -> Self {
        Self {
            t_us,
            x,
            y,
            polarity,
        }
    }

    /// Total order used whenever a stream is sorted: time first, then position.
    pub fn sort_key(&self) -> (u64, u32, u32, Polarity) {
        (self.t_us, self.y, self.x, self.polarity)
    }
}

/// Time-ordered events from a `width x height` sensor over `[0, duration_us)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
    duration_us: u64,
    width: u32,
    height: u32,
}

impl EventStream {
    pub fn new(events: Vec<Event>, duration_us: u64, width: u32, height: u32) -> Result<Self> {
        if duration_us == 0 {
            return Err(Error::validation("event stream duration must be positive"));
        }
        for (i, e) in events.iter().enumerate() {
            if e.x >= width || e.y >= height {
                return Err(Error::validation(format!(
                    "event {i} at ({}, {}) outside {width}x{height} sensor",
                    e.x, e.y
                )));
            }
            if e.t_us > duration_us {
                return Err(Error::validation(format!(
                    "event {i} at t={} beyond duration {duration_us}",
                    e.t_us
                )));
            }
            if i > 0 && events[i - 1].t_us > e.t_us {
                return Err(Error::validation(format!("events not sorted by time at index {i}")));
            }
        }
        Ok(Self {
            events,
            duration_us,
            width,
            height,
        })
    }

    /// Sorts with [`Event::sort_key`] before validating.
    pub fn from_unsorted(
        mut events: Vec<Event>,
        duration_us: u64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        events.sort_unstable_by_key(Event::sort_key);
        Self::new(events, duration_us, width, height)
    }

    pub fn empty(duration_us: u64, width: u32, height: u32) -> Result<Self> {
        Self::new(Vec::new(), duration_us, width, height)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration_us(&self) -> u64 {
        self.duration_us
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * (self.events.len() + 1));
        out.push_str(EVENTS_CSV_HEADER);
        out.push('\n');
        for e in &self.events {
            let _ = writeln!(out, "{},{},{},{}", e.t_us, e.x, e.y, e.polarity.bit());
        }
        out
    }

    /// Parses the `t_us,x,y,p` format; sensor size and duration come from the sample metadata.
    pub fn parse_csv(text: &str, duration_us: u64, width: u32, height: u32) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some(EVENTS_CSV_HEADER) => {}
            other => {
                return Err(Error::validation(format!(
                    "events.csv header must be {EVENTS_CSV_HEADER:?}, found {other:?}"
                )))
            }
        }
        let mut events = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            events.push(parse_event_line(line).ok_or_else(|| {
                Error::validation(format!("events.csv line {}: malformed {line:?}", lineno + 2))
            })?);
        }
        Self::new(events, duration_us, width, height)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path, duration_us: u64, width: u32, height: u32) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, duration_us, width, height)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }
}

fn parse_event_line(line: &str) -> Option<Event> {
    let mut fields = line.split(',').map(str::trim);
    let t_us = fields.next()?.parse().ok()?;
    let x = fields.next()?.parse().ok()?;
    let y = fields.next()?.parse().ok()?;
    let polarity = match fields.next()? {
        "0" => Polarity::Off,
        "1" => Polarity::On,
        _ => return None,
    };
    if fields.next().is_some() {
        return None;
    }
    Some(Event::new(t_us, x, y, polarity))
}
