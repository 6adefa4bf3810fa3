//! Events, sensor geometry, time windows and the two on-disk event formats.
//!
//! Timestamps are integer microseconds everywhere in this module. Streams are
//! validated on construction: every event is inside the sensor and events are
//! sorted by timestamp. Ties keep their storage order.

use std::fmt;
use std::io::{BufRead, Read, Write};

use thiserror::Error;

/// Magic bytes of the binary event format.
pub const EVENT_MAGIC: &[u8; 4] = b"EVS1";
const HEADER_LEN: usize = 4 + 2 + 2 + 8;
const RECORD_LEN: usize = 8 + 2 + 2 + 1 + 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("line {0}: malformed event record")]
    MalformedLine(usize),
    #[error("event {0} lies outside the sensor")]
    OutOfBounds(usize),
    #[error("event {0} is earlier than its predecessor")]
    UnsortedStream(usize),
    #[error("stream needs at least two events spanning a non-zero duration")]
    DegenerateStream,
    #[error("time window must satisfy t_end > t_start (got [{0}, {1}])")]
    DegenerateWindow(u64, u64),
    #[error("sensor geometry must be at least 1x1 (got {0}x{1})")]
    BadGeometry(usize, usize),
    #[error("binary stream does not start with EVS1")]
    BadMagic,
    #[error("binary record {0} is truncated")]
    TruncatedRecord(usize),
    #[error("event {0} has invalid polarity")]
    BadPolarity(usize),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for EventError {
    fn from(err: std::io::Error) -> Self {
        EventError::Io(err.to_string())
    }
}

/// Sign of a brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    /// Accepts `-1`, `+1` and the `0`/`1` convention (0 maps to negative).
    pub fn from_raw(raw: i64) -> Option<Self> {
        match raw {
            -1 | 0 => Some(Polarity::Negative),
            1 => Some(Polarity::Positive),
            _ => None,
        }
    }

    #[inline]
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Negative => -1,
            Polarity::Positive => 1,
        }
    }

    /// `-1.0` or `1.0`, built from the bit pattern to keep hot loops branch-free.
    #[inline]
    pub fn sign_f32(self) -> f32 {
        f32::from_bits(0x3f80_0000 | (((self.channel() as u32) ^ 1) << 31))
    }

    /// Channel index used by the two-channel representations.
    #[inline]
    pub fn channel(self) -> usize {
        match self {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Self { t, x, y, p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    width: usize,
    height: usize,
}

impl SensorGeometry {
    pub fn new(width: usize, height: usize) -> Result<Self, EventError> {
        if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
            return Err(EventError::BadGeometry(width, height));
        }
        Ok(Self { width, height })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Row-major index of `(x, y)`.
    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }
}

impl fmt::Display for SensorGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Closed time interval `[t_start, t_end]` in microseconds with `t_end > t_start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeWindow {
    t_start: u64,
    t_end: u64,
}

impl TimeWindow {
    pub fn new(t_start: u64, t_end: u64) -> Result<Self, EventError> {
        if t_end <= t_start {
            return Err(EventError::DegenerateWindow(t_start, t_end));
        }
        Ok(Self { t_start, t_end })
    }

    #[inline]
    pub fn start(&self) -> u64 {
        self.t_start
    }

    #[inline]
    pub fn end(&self) -> u64 {
        self.t_end
    }

    /// `t_end - t_start` in microseconds.
    #[inline]
    pub fn duration(&self) -> u64 {
        self.t_end - self.t_start
    }

    /// `(t - t_start) / duration` in double precision.
    #[inline]
    pub fn normalize(&self, t: u64) -> f64 {
        (t as f64 - self.t_start as f64) / self.duration() as f64
    }
}

/// Immutable, validated, time-sorted sequence of events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    geometry: SensorGeometry,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates bounds and ordering.
    pub fn new(geometry: SensorGeometry, events: Vec<Event>) -> Result<Self, EventError> {
        check_bounds(&geometry, &events)?;
        if let Some(i) = first_unsorted(&events) {
            return Err(EventError::UnsortedStream(i));
        }
        Ok(Self { geometry, events })
    }

    /// Stable-sorts by timestamp, then validates. Ties keep their input order.
    pub fn sorted(geometry: SensorGeometry, mut events: Vec<Event>) -> Result<Self, EventError> {
        check_bounds(&geometry, &events)?;
        events.sort_by_key(|e| e.t);
        Ok(Self { geometry, events })
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self { geometry, events: Vec::new() }
    }

    #[inline]
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    #[inline]
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.events.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// `[t_first, t_last]` of the stream.
    pub fn natural_window(&self) -> Result<TimeWindow, EventError> {
        match (self.events.first(), self.events.last()) {
            (Some(first), Some(last)) if self.events.len() >= 2 && last.t > first.t => {
                TimeWindow::new(first.t, last.t)
            }
            _ => Err(EventError::DegenerateStream),
        }
    }

    /// Events inside `window`, located by binary search.
    pub fn slice_events(&self, window: &TimeWindow, closed_end: bool) -> &[Event] {
        let lo = self.events.partition_point(|e| e.t < window.start());
        let hi = if closed_end {
            self.events.partition_point(|e| e.t <= window.end())
        } else {
            self.events.partition_point(|e| e.t < window.end())
        };
        &self.events[lo..hi.max(lo)]
    }

    /// Owned sub-stream; see [`EventStream::slice_events`].
    pub fn slice(&self, window: &TimeWindow, closed_end: bool) -> EventStream {
        EventStream {
            geometry: self.geometry,
            events: self.slice_events(window, closed_end).to_vec(),
        }
    }

    /// Parses `t,x,y,p` lines. Blank lines and `#` comments are skipped.
    pub fn parse_csv<R: BufRead>(reader: R, geometry: SensorGeometry) -> Result<Self, EventError> {
        let mut events = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let event = parse_csv_line(line).ok_or(EventError::MalformedLine(lineno + 1))?;
            events.push(event);
        }
        Self::new(geometry, events)
    }

    pub fn parse_csv_str(text: &str, geometry: SensorGeometry) -> Result<Self, EventError> {
        Self::parse_csv(text.as_bytes(), geometry)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<(), EventError> {
        for e in &self.events {
            writeln!(writer, "{},{},{},{}", e.t, e.x, e.y, e.p.sign())?;
        }
        Ok(())
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * self.events.len());
        out.extend_from_slice(EVENT_MAGIC);
        out.extend_from_slice(&(self.geometry.width as u16).to_le_bytes());
        out.extend_from_slice(&(self.geometry.height as u16).to_le_bytes());
        out.extend_from_slice(&(self.events.len() as u64).to_le_bytes());
        for e in &self.events {
            out.extend_from_slice(&e.t.to_le_bytes());
            out.extend_from_slice(&e.x.to_le_bytes());
            out.extend_from_slice(&e.y.to_le_bytes());
            out.push(e.p.sign() as u8);
            out.push(0);
        }
        out
    }

    pub fn write_binary<W: Write>(&self, mut writer: W) -> Result<(), EventError> {
        writer.write_all(&self.to_binary())?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut reader: R) -> Result<Self, EventError> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        Self::from_binary(&bytes)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, EventError> {
        if bytes.len() < 4 || &bytes[..4] != EVENT_MAGIC {
            return Err(EventError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(EventError::TruncatedRecord(0));
        }
        let width = u16::from_le_bytes([bytes[4], bytes[5]]) as usize;
        let height = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let geometry = SensorGeometry::new(width, height)?;

        let payload = &bytes[HEADER_LEN..];
        let mut events = Vec::with_capacity((payload.len() / RECORD_LEN).min(count as usize));
        for i in 0..count as usize {
            let rec = payload
                .get(i * RECORD_LEN..(i + 1) * RECORD_LEN)
                .ok_or(EventError::TruncatedRecord(i))?;
            let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
            let x = u16::from_le_bytes([rec[8], rec[9]]);
            let y = u16::from_le_bytes([rec[10], rec[11]]);
            let p = match rec[12] as i8 {
                -1 => Polarity::Negative,
                1 => Polarity::Positive,
                _ => return Err(EventError::BadPolarity(i)),
            };
            events.push(Event { t, x, y, p });
        }
        Self::new(geometry, events)
    }
}

fn parse_csv_line(line: &str) -> Option<Event> {
    let mut fields = line.split(',').map(str::trim);
    let t = fields.next()?.parse::<u64>().ok()?;
    let x = fields.next()?.parse::<u16>().ok()?;
    let y = fields.next()?.parse::<u16>().ok()?;
    let p = Polarity::from_raw(fields.next()?.parse::<i64>().ok()?)?;
    if fields.next().is_some() {
        return None;
    }
    Some(Event { t, x, y, p })
}

fn check_bounds(geometry: &SensorGeometry, events: &[Event]) -> Result<(), EventError> {
    match events
        .iter()
        .position(|e| e.x as usize >= geometry.width || e.y as usize >= geometry.height)
    {
        Some(i) => Err(EventError::OutOfBounds(i)),
        None => Ok(()),
    }
}

fn first_unsorted(events: &[Event]) -> Option<usize> {
    events.windows(2).position(|w| w[1].t < w[0].t).map(|i| i + 1)
}
