//! Event frames: per-pixel counts over a time window, pixel selection, and
//! normalization into network inputs.

use std::fmt::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::events::EventStream;

/// Half-open time interval `[t_start, t_start + duration)` in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub t_start: u64,
    pub duration: u64,
}

/// Per-pixel event counts over one time window; the unit "place"
/// representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFrame {
    counts: Vec<u32>,
    height: usize,
    width: usize,
    /// Sequential label assigned by window order, if any.
    pub place_index: Option<usize>,
    pub window: TimeWindow,
}

impl EventFrame {
    pub fn new(
        counts: Vec<u32>,
        height: usize,
        width: usize,
        place_index: Option<usize>,
        window: TimeWindow,
    ) -> Result<EventFrame> {
        if counts.len() != height * width {
            return Err(Error::invalid(format!(
                "frame data length {} does not match {}x{}",
                counts.len(),
                height,
                width
            )));
        }
        Ok(EventFrame {
            counts,
            height,
            width,
            place_index,
            window,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major counts.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn get(&self, y: usize, x: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Debug dump format: `# <height>,<width>,<place_index>` then one CSV row
    /// per line. A missing place index is written as -1.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let idx = self.place_index.map(|i| i as i64).unwrap_or(-1);
        let _ = writeln!(out, "# {},{},{}", self.height, self.width, idx);
        for row in self.counts.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(","));
        }
        out
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Parses the frame dump format written by [`EventFrame::to_text`].
pub fn parse_frame_text(text: &str) -> Result<EventFrame> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty frame dump"))?;
    let rest = header
        .strip_prefix('#')
        .ok_or_else(|| Error::parse(1, "expected '# <height>,<width>,<place_index>'"))?;
    let fields: Vec<&str> = rest.trim().split(',').collect();
    if fields.len() != 3 {
        return Err(Error::parse(1, "expected '# <height>,<width>,<place_index>'"));
    }
    let height: usize = fields[0]
        .parse()
        .map_err(|_| Error::parse(1, "bad height"))?;
    let width: usize = fields[1]
        .parse()
        .map_err(|_| Error::parse(1, "bad width"))?;
    let place: i64 = fields[2]
        .parse()
        .map_err(|_| Error::parse(1, "bad place index"))?;

    let mut counts = Vec::with_capacity(height * width);
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        for tok in line.split(',') {
            let c: u32 = tok
                .parse()
                .map_err(|_| Error::parse(idx + 2, format!("bad count '{tok}'")))?;
            counts.push(c);
        }
    }
    let place_index = if place < 0 { None } else { Some(place as usize) };
    EventFrame::new(
        counts,
        height,
        width,
        place_index,
        TimeWindow {
            t_start: 0,
            duration: 0,
        },
    )
}

/// Pixel intensities in `[0, 1]`, same shape as the source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFrame {
    intensities: Vec<f64>,
    height: usize,
    width: usize,
}

impl NormalizedFrame {
    /// Builds a frame from row-major intensities, validating the `[0, 1]`
    /// range.
    pub fn new(intensities: Vec<f64>, height: usize, width: usize) -> Result<NormalizedFrame> {
        if intensities.len() != height * width {
            return Err(Error::invalid(format!(
                "frame data length {} does not match {}x{}",
                intensities.len(),
                height,
                width
            )));
        }
        if let Some(v) = intensities.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(NormalizedFrame {
            intensities,
            height,
            width,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Row-major intensities; this flattening order is the network input
    /// order everywhere.
    pub fn pixels(&self) -> &[f64] {
        &self.intensities
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.intensities[y * self.width + x]
    }
}

/// How frames are downsampled to the network input size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PixelSelector {
    /// Keep one pixel per kernel-sized block, at `offset` within the block.
    Center {
        kernel: usize,
        stride: usize,
        /// (dy, dx) within the kernel.
        offset: (usize, usize),
    },
    /// Keep a fixed set of pixels drawn once from a seeded uniform shuffle,
    /// reshaped to a square. The same indices apply to every frame of a
    /// dataset so reference and query use identical pixels.
    Random {
        indices: Vec<(usize, usize)>,
        seed: u64,
    },
}

impl PixelSelector {
    pub fn center(kernel: usize, stride: usize, offset: (usize, usize)) -> Result<PixelSelector> {
        if kernel == 0 || stride == 0 {
            return Err(Error::invalid("kernel and stride must be positive"));
        }
        if offset.0 >= kernel || offset.1 >= kernel {
            return Err(Error::invalid(format!(
                "offset ({},{}) outside kernel {}",
                offset.0, offset.1, kernel
            )));
        }
        Ok(PixelSelector::Center {
            kernel,
            stride,
            offset,
        })
    }

    /// Draws `n` distinct in-bounds pixel coordinates for an
    /// `height` x `width` frame. `n` must be a perfect square; the selected
    /// values are reshaped to sqrt(n) x sqrt(n) in draw order.
    pub fn random(height: usize, width: usize, n: usize, seed: u64) -> Result<PixelSelector> {
        let total = height * width;
        if n == 0 || n > total {
            return Err(Error::invalid(format!(
                "cannot select {n} pixels from a {height}x{width} frame"
            )));
        }
        let side = integer_sqrt(n).ok_or_else(|| {
            Error::invalid(format!("selected pixel count {n} must be a perfect square"))
        })?;
        let _ = side;
        let mut all: Vec<(usize, usize)> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (y, x)))
            .collect();
        let mut rng = StdRng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        all.truncate(n);
        Ok(PixelSelector::Random { indices: all, seed })
    }

    /// Applies the selection to one frame.
    pub fn apply(&self, frame: &EventFrame) -> Result<EventFrame> {
        match self {
            PixelSelector::Center {
                kernel,
                stride,
                offset,
            } => select_center(frame, *kernel, *stride, *offset),
            PixelSelector::Random { indices, .. } => gather_indices(frame, indices),
        }
    }

    /// Number of pixels the selector keeps for frames of the given shape.
    pub fn output_pixels(&self, height: usize, width: usize) -> usize {
        match self {
            PixelSelector::Center { stride, .. } => (height / stride) * (width / stride),
            PixelSelector::Random { indices, .. } => indices.len(),
        }
    }
}

fn integer_sqrt(n: usize) -> Option<usize> {
    let side = (n as f64).sqrt().round() as usize;
    (side * side == n).then_some(side)
}

/// Splits a stream into consecutive non-overlapping windows of `duration`
/// microseconds and counts events (any polarity) per pixel.
///
/// Windows are anchored at the first event's timestamp and run through the
/// last event; interior empty windows produce all-zero frames so place
/// indices stay sequential in time. An empty stream yields no frames.
pub fn bin_events(stream: &EventStream, duration: u64) -> Result<Vec<EventFrame>> {
    if duration == 0 {
        return Err(Error::invalid("bin duration must be positive"));
    }
    let (Some(t0), Some(t1)) = (stream.t_min(), stream.t_max()) else {
        return Ok(Vec::new());
    };
    let geometry = stream.geometry();
    let width = geometry.width as usize;
    let height = geometry.height as usize;
    let n_windows = ((t1 - t0) / duration + 1) as usize;
    // 16M one-second windows is ~185 days of traversal; beyond that the
    // input is corrupt, not large.
    const MAX_WINDOWS: usize = 1 << 24;
    if n_windows > MAX_WINDOWS {
        return Err(Error::invalid(format!(
            "stream spans {n_windows} windows of {duration} us; limit is {MAX_WINDOWS}"
        )));
    }

    let mut frames: Vec<EventFrame> = (0..n_windows)
        .map(|k| EventFrame {
            counts: vec![0u32; width * height],
            height,
            width,
            place_index: Some(k),
            window: TimeWindow {
                t_start: t0 + k as u64 * duration,
                duration,
            },
        })
        .collect();

    for ev in stream.events() {
        let k = ((ev.t - t0) / duration) as usize;
        frames[k].counts[ev.y as usize * width + ev.x as usize] += 1;
    }
    Ok(frames)
}

/// Keeps `input[r*stride + offset.0][c*stride + offset.1]` for each output
/// cell `(r, c)`; an 80x80 frame becomes 10x10 with the defaults
/// (kernel 8, stride 8, offset (4,4)).
pub fn select_center(
    frame: &EventFrame,
    kernel: usize,
    stride: usize,
    offset: (usize, usize),
) -> Result<EventFrame> {
    if kernel == 0 || stride == 0 {
        return Err(Error::invalid("kernel and stride must be positive"));
    }
    if offset.0 >= kernel || offset.1 >= kernel {
        return Err(Error::invalid(format!(
            "offset ({},{}) outside kernel {}",
            offset.0, offset.1, kernel
        )));
    }
    if !frame.height.is_multiple_of(stride) || !frame.width.is_multiple_of(stride) {
        return Err(Error::invalid(format!(
            "frame {}x{} not divisible by stride {}",
            frame.height, frame.width, stride
        )));
    }
    let out_h = frame.height / stride;
    let out_w = frame.width / stride;
    let mut counts = Vec::with_capacity(out_h * out_w);
    for r in 0..out_h {
        for c in 0..out_w {
            let y = r * stride + offset.0;
            let x = c * stride + offset.1;
            if y >= frame.height || x >= frame.width {
                return Err(Error::invalid(format!(
                    "selection ({y},{x}) outside frame {}x{}",
                    frame.height, frame.width
                )));
            }
            counts.push(frame.get(y, x));
        }
    }
    EventFrame::new(counts, out_h, out_w, frame.place_index, frame.window)
}

/// Selects `n` pixels uniformly at random (fixed by `seed`) and reshapes to
/// sqrt(n) x sqrt(n). Deterministic: the same seed always selects the same
/// pixels.
pub fn select_random(frame: &EventFrame, n: usize, seed: u64) -> Result<EventFrame> {
    let selector = PixelSelector::random(frame.height, frame.width, n, seed)?;
    selector.apply(frame)
}

fn gather_indices(frame: &EventFrame, indices: &[(usize, usize)]) -> Result<EventFrame> {
    let side = integer_sqrt(indices.len()).ok_or_else(|| {
        Error::invalid(format!(
            "selected pixel count {} must be a perfect square",
            indices.len()
        ))
    })?;
    let mut counts = Vec::with_capacity(indices.len());
    for &(y, x) in indices {
        if y >= frame.height || x >= frame.width {
            return Err(Error::invalid(format!(
                "selection ({y},{x}) outside frame {}x{}",
                frame.height, frame.width
            )));
        }
        counts.push(frame.get(y, x));
    }
    EventFrame::new(counts, side, side, frame.place_index, frame.window)
}

/// Divides every count by the frame maximum, mapping into `[0, 1]`.
///
/// An all-zero frame normalizes to all zeros: stationary platforms
/// legitimately produce near-empty windows and must not fail here.
pub fn normalize(frame: &EventFrame) -> NormalizedFrame {
    let max = frame.counts.iter().copied().max().unwrap_or(0);
    let intensities = if max == 0 {
        vec![0.0; frame.counts.len()]
    } else {
        let m = max as f64;
        frame.counts.iter().map(|&c| c as f64 / m).collect()
    };
    NormalizedFrame {
        intensities,
        height: frame.height,
        width: frame.width,
    }
}
