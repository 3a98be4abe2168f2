//! Event-camera streams: parsing, validation, and slicing.
//!
//! The file format is plain UTF-8 text with LF line endings: a one-line
//! geometry header `# <width>,<height>` followed by one event per line as
//! `<t>,<x>,<y>,<p>` where `t` is microseconds, `x`/`y` are pixel
//! coordinates, and `p` is 0 (OFF) or 1 (ON).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Brightness-change direction reported by the sensor.
///
/// Both polarities are counted identically downstream; the distinction is
/// kept so streams round-trip through files unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn from_flag(p: u8) -> Option<Polarity> {
        match p {
            0 => Some(Polarity::Off),
            1 => Some(Polarity::On),
            _ => None,
        }
    }

    pub fn as_flag(self) -> u8 {
        match self {
            Polarity::Off => 0,
            Polarity::On => 1,
        }
    }
}

/// One pixel-change record from a dynamic vision sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u64,
    /// Column index.
    pub x: u16,
    /// Row index.
    pub y: u16,
    pub polarity: Polarity,
}

/// Sensor extent in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub width: u16,
    pub height: u16,
}

impl Geometry {
    pub fn new(width: u16, height: u16) -> Geometry {
        Geometry { width, height }
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }
}

/// Rectangular crop region, in sensor coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionOfInterest {
    /// Left edge of the region.
    pub x0: u16,
    /// Top edge of the region.
    pub y0: u16,
    pub width: u16,
    pub height: u16,
}

impl RegionOfInterest {
    pub fn new(x0: u16, y0: u16, width: u16, height: u16) -> RegionOfInterest {
        RegionOfInterest {
            x0,
            y0,
            width,
            height,
        }
    }

    /// Errors unless the region lies fully inside `geometry`.
    pub fn validate(&self, geometry: Geometry) -> Result<()> {
        let x1 = self.x0 as u32 + self.width as u32;
        let y1 = self.y0 as u32 + self.height as u32;
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("region of interest must be non-empty"));
        }
        if x1 > geometry.width as u32 || y1 > geometry.height as u32 {
            return Err(Error::invalid(format!(
                "region of interest {}x{}+{}+{} exceeds sensor geometry {}x{}",
                self.width, self.height, self.x0, self.y0, geometry.width, geometry.height
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: u16, y: u16) -> bool {
        x >= self.x0
            && y >= self.y0
            && (x as u32) < self.x0 as u32 + self.width as u32
            && (y as u32) < self.y0 as u32 + self.height as u32
    }
}

/// An ordered sequence of events with the geometry they were recorded on.
///
/// Events are sorted by timestamp (non-decreasing); construction sorts with a
/// stable sort so equal-timestamp events keep their input order. Immutable
/// after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
    geometry: Geometry,
}

impl EventStream {
    /// Builds a stream, validating bounds and stable-sorting by timestamp.
    pub fn new(mut events: Vec<Event>, geometry: Geometry) -> Result<EventStream> {
        for ev in &events {
            if !geometry.contains(ev.x, ev.y) {
                return Err(Error::invalid(format!(
                    "event at ({},{}) outside geometry {}x{}",
                    ev.x, ev.y, geometry.width, geometry.height
                )));
            }
        }
        events.sort_by_key(|ev| ev.t);
        Ok(EventStream { events, geometry })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Timestamp of the first event, if any.
    pub fn t_min(&self) -> Option<u64> {
        self.events.first().map(|ev| ev.t)
    }

    /// Timestamp of the last event, if any.
    pub fn t_max(&self) -> Option<u64> {
        self.events.last().map(|ev| ev.t)
    }

    /// Keeps only events inside `roi`, re-basing coordinates to its origin.
    pub fn crop(&self, roi: &RegionOfInterest) -> Result<EventStream> {
        roi.validate(self.geometry)?;
        let events = self
            .events
            .iter()
            .filter(|ev| roi.contains(ev.x, ev.y))
            .map(|ev| Event {
                t: ev.t,
                x: ev.x - roi.x0,
                y: ev.y - roi.y0,
                polarity: ev.polarity,
            })
            .collect();
        // already sorted; no bounds can be violated after re-basing
        Ok(EventStream {
            events,
            geometry: Geometry::new(roi.width, roi.height),
        })
    }

    /// Events with `t_start <= t < t_start + duration`, same geometry.
    pub fn window(&self, t_start: u64, duration: u64) -> Result<EventStream> {
        if duration == 0 {
            return Err(Error::invalid("window duration must be positive"));
        }
        let t_end = t_start.saturating_add(duration);
        let lo = self.events.partition_point(|ev| ev.t < t_start);
        let hi = self.events.partition_point(|ev| ev.t < t_end);
        Ok(EventStream {
            events: self.events[lo..hi].to_vec(),
            geometry: self.geometry,
        })
    }

    /// Serializes to the canonical text format (LF endings, trailing newline).
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 + self.events.len() * 16);
        let _ = writeln!(out, "# {},{}", self.geometry.width, self.geometry.height);
        for ev in &self.events {
            let _ = writeln!(out, "{},{},{},{}", ev.t, ev.x, ev.y, ev.polarity.as_flag());
        }
        out
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Parses the text event format.
///
/// Out-of-order timestamps are accepted and stable-sorted rather than
/// rejected; real sensor buffers can reorder slightly and stability keeps the
/// result deterministic.
pub fn parse_event_file(text: &str) -> Result<EventStream> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file: missing geometry header"))?;
    let geometry = parse_header(header)?;

    let mut events = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        events.push(parse_event_line(line, lineno, geometry)?);
    }
    EventStream::new(events, geometry)
}

/// Reads and parses an event file from disk.
pub fn read_event_file(path: impl AsRef<Path>) -> Result<EventStream> {
    let text = std::fs::read_to_string(path)?;
    parse_event_file(&text)
}

fn parse_header(line: &str) -> Result<Geometry> {
    let rest = line
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(1, "expected geometry header '# <width>,<height>'"))?
        .trim();
    let (w, h) = rest
        .split_once(',')
        .ok_or_else(|| Error::parse(1, "geometry header must be '# <width>,<height>'"))?;
    let width: u16 = w
        .trim()
        .parse()
        .map_err(|_| Error::parse(1, format!("bad sensor width '{}'", w.trim())))?;
    let height: u16 = h
        .trim()
        .parse()
        .map_err(|_| Error::parse(1, format!("bad sensor height '{}'", h.trim())))?;
    if width == 0 || height == 0 {
        return Err(Error::parse(1, "sensor geometry must be non-zero"));
    }
    Ok(Geometry::new(width, height))
}

fn parse_event_line(line: &str, lineno: usize, geometry: Geometry) -> Result<Event> {
    let mut fields = line.split(',');
    let mut next = |name: &str| {
        fields
            .next()
            .ok_or_else(|| Error::parse(lineno, format!("missing field '{name}'")))
    };
    let t_raw = next("t")?;
    let x_raw = next("x")?;
    let y_raw = next("y")?;
    let p_raw = next("p")?;
    if fields.next().is_some() {
        return Err(Error::parse(lineno, "too many fields, expected 't,x,y,p'"));
    }

    let t: i64 = t_raw
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad timestamp '{t_raw}'")))?;
    if t < 0 {
        return Err(Error::parse(lineno, format!("negative timestamp {t}")));
    }
    let x: u16 = x_raw
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad x coordinate '{x_raw}'")))?;
    let y: u16 = y_raw
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad y coordinate '{y_raw}'")))?;
    if !geometry.contains(x, y) {
        return Err(Error::parse(
            lineno,
            format!(
                "coordinate ({x},{y}) outside geometry {}x{}",
                geometry.width, geometry.height
            ),
        ));
    }
    let p: u8 = p_raw
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad polarity '{p_raw}'")))?;
    let polarity = Polarity::from_flag(p)
        .ok_or_else(|| Error::parse(lineno, format!("polarity must be 0 or 1, got {p}")))?;

    Ok(Event {
        t: t as u64,
        x,
        y,
        polarity,
    })
}
