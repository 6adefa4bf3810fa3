//! Baseline representations: event frame, event count, time surface, voxel
//! grid and TORE volume.

use crate::event::{Event, EventStream, Polarity, TimeWindow};
use crate::repr::{for_each_chunk, ReprError, Threading, WindowSpec, FILL};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoxelConfig {
    pub bins: usize,
    pub window: WindowSpec,
}

impl VoxelConfig {
    pub fn new(bins: usize) -> Self {
        Self { bins, window: WindowSpec::Natural }
    }

    pub fn with_window(mut self, window: impl Into<WindowSpec>) -> Self {
        self.window = window.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToreConfig {
    pub depth: usize,
    pub window: WindowSpec,
}

impl ToreConfig {
    pub fn new(depth: usize) -> Self {
        Self { depth, window: WindowSpec::Natural }
    }

    pub fn with_window(mut self, window: impl Into<WindowSpec>) -> Self {
        self.window = window.into();
        self
    }
}

/// Shared by the time surface and TORE so their first layers agree bitwise.
#[inline]
fn normalized(window: &TimeWindow, t: u64) -> f32 {
    window.normalize(t) as f32
}

#[inline]
fn pixel(e: &Event, width: usize) -> usize {
    e.y as usize * width + e.x as usize
}

/// Sum of polarities per pixel (`1 x H x W`).
pub fn build_event_frame(stream: &EventStream) -> DenseTensor {
    event_frame(stream, Threading::Single)
}

pub(crate) fn event_frame(stream: &EventStream, threading: Threading) -> DenseTensor {
    let g = stream.geometry();
    let mut out = DenseTensor::zeros(1, g.height(), g.width());
    let events = stream.events();
    let width = g.width();
    match threading {
        Threading::Single => {
            let data = out.as_mut_slice();
            for e in events {
                data[pixel(e, width)] += e.p.sign_f32();
            }
        }
        Threading::Parallel => {
            let band = row_band(g.height());
            for_each_chunk(out.as_mut_slice(), band * width, threading, |i, chunk| {
                let rows = i * band..(i + 1) * band;
                for e in events.iter().filter(|e| rows.contains(&(e.y as usize))) {
                    chunk[pixel(e, width) - rows.start * width] += e.p.sign_f32();
                }
            });
        }
    }
    out
}

fn row_band(height: usize) -> usize {
    height.div_ceil(rayon::current_num_threads().max(1)).max(1)
}

/// Per-polarity counts (`2 x H x W`, channel 0 negative).
pub fn build_event_count(stream: &EventStream) -> DenseTensor {
    event_count(stream, Threading::Single)
}

pub(crate) fn event_count(stream: &EventStream, threading: Threading) -> DenseTensor {
    let g = stream.geometry();
    let mut out = DenseTensor::zeros(2, g.height(), g.width());
    let events = stream.events();
    let width = g.width();
    match threading {
        Threading::Single => {
            let plane = g.pixels();
            let data = out.as_mut_slice();
            for e in events {
                data[e.p.channel() * plane + pixel(e, width)] += 1.0;
            }
        }
        Threading::Parallel => {
            for_each_chunk(out.as_mut_slice(), g.pixels(), threading, |c, plane| {
                for e in events.iter().filter(|e| e.p.channel() == c) {
                    plane[pixel(e, width)] += 1.0;
                }
            });
        }
    }
    out
}

/// Normalized timestamp of the latest event per polarity (`2 x H x W`), `-1` where none.
pub fn build_time_surface(stream: &EventStream, window: &WindowSpec) -> Result<DenseTensor, ReprError> {
    time_surface(stream, window, Threading::Single)
}

pub(crate) fn time_surface(
    stream: &EventStream,
    window: &WindowSpec,
    threading: Threading,
) -> Result<DenseTensor, ReprError> {
    let window = window.resolve(stream)?;
    let g = stream.geometry();
    let width = g.width();
    let events = stream.slice_events(&window, true);

    let mut out = DenseTensor::filled(2, g.height(), width, FILL);
    for_each_chunk(out.as_mut_slice(), g.pixels(), threading, |c, plane| {
        for e in events.iter().filter(|e| e.p.channel() == c) {
            plane[pixel(e, width)] = normalized(&window, e.t);
        }
    });
    Ok(out)
}

/// Bilinear-in-time voxel grid of polarities (`B x H x W`).
pub fn build_voxel_grid(stream: &EventStream, config: &VoxelConfig) -> Result<DenseTensor, ReprError> {
    voxel(stream, config, Threading::Single)
}

pub(crate) fn voxel(
    stream: &EventStream,
    config: &VoxelConfig,
    threading: Threading,
) -> Result<DenseTensor, ReprError> {
    if config.bins < 2 {
        return Err(ReprError::BadConfig("voxel grid needs at least two bins".into()));
    }
    let window = config.window.resolve(stream)?;
    let g = stream.geometry();
    let width = g.width();
    let events = stream.slice_events(&window, true);
    let scale = (config.bins - 1) as f64;
    let tstar = |e: &Event| window.normalize(e.t) * scale;

    let mut out = DenseTensor::zeros(config.bins, g.height(), width);
    for_each_chunk(out.as_mut_slice(), g.pixels(), threading, |b, plane| {
        let b = b as f64;
        let lo = events.partition_point(|e| tstar(e) <= b - 1.0);
        let hi = events.partition_point(|e| tstar(e) < b + 1.0);
        for e in &events[lo..hi.max(lo)] {
            let weight = (1.0 - (b - tstar(e)).abs()).max(0.0);
            plane[pixel(e, width)] += e.p.sign() as f32 * weight as f32;
        }
    });
    Ok(out)
}

/// The `depth` latest normalized timestamps per polarity (`2K x H x W`).
///
/// Channels `0..K` hold negative events and `K..2K` positive ones; within a
/// polarity, layer 0 is the most recent event.
pub fn build_tore(stream: &EventStream, config: &ToreConfig) -> Result<DenseTensor, ReprError> {
    tore(stream, config, Threading::Single)
}

pub(crate) fn tore(
    stream: &EventStream,
    config: &ToreConfig,
    threading: Threading,
) -> Result<DenseTensor, ReprError> {
    if config.depth == 0 {
        return Err(ReprError::BadConfig("TORE depth must be at least 1".into()));
    }
    let window = config.window.resolve(stream)?;
    let g = stream.geometry();
    let width = g.width();
    let plane_len = g.pixels();
    let depth = config.depth;
    let events = stream.slice_events(&window, true);

    let mut out = DenseTensor::filled(2 * depth, g.height(), width, FILL);
    for_each_chunk(out.as_mut_slice(), depth * plane_len, threading, |c, block| {
        let polarity = if c == 0 { Polarity::Negative } else { Polarity::Positive };
        for e in events.iter().filter(|e| e.p == polarity) {
            let idx = pixel(e, width);
            for k in (1..depth).rev() {
                block[k * plane_len + idx] = block[(k - 1) * plane_len + idx];
            }
            block[idx] = normalized(&window, e.t);
        }
    });
    Ok(out)
}
