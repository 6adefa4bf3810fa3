//! Layered bidirectional time surfaces.
//!
//! For `B` probes the window is cut into `B + 1` intervals of length
//! `range = duration / (B + 1)`; probe `i` sits at `t_start + i * range`.
//! Each layer stores, per pixel, the normalized time `(t - probe) / range` of
//! the latest event in `[probe - range, probe]`, or failing that the earliest
//! event in `(probe, probe + range]`, or `-1`. Polarity is ignored.

use crate::event::{Event, EventStream, TimeWindow};
use crate::repr::{for_each_chunk, ReprError, Threading, WindowSpec, FILL};
use crate::tensor::DenseTensor;

/// Which qualifying future event a layer keeps when no past event exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FutureSelection {
    /// The first event after the probe.
    #[default]
    Earliest,
    /// The last event within the search range (plain overwrite in time order).
    Latest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabitsConfig {
    pub bins: usize,
    pub window: WindowSpec,
    pub future: FutureSelection,
}

impl LabitsConfig {
    pub fn new(bins: usize) -> Self {
        Self {
            bins,
            window: WindowSpec::Natural,
            future: FutureSelection::Earliest,
        }
    }

    pub fn with_window(mut self, window: impl Into<WindowSpec>) -> Self {
        self.window = window.into();
        self
    }

    pub fn with_future(mut self, future: FutureSelection) -> Self {
        self.future = future;
        self
    }
}

/// Probe layout of a window, in microseconds as `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabitsProbes {
    pub start: f64,
    pub range: f64,
    pub bins: usize,
}

impl LabitsProbes {
    pub fn new(window: &TimeWindow, bins: usize) -> Result<Self, ReprError> {
        if bins == 0 {
            return Err(ReprError::BadConfig("labits needs at least one bin".into()));
        }
        let range = window.duration() as f64 / (bins + 1) as f64;
        Ok(Self {
            start: window.start() as f64,
            range,
            bins,
        })
    }

    /// Probe time of layer `layer` (0-based, so layer 0 is the first probe).
    #[inline]
    pub fn probe(&self, layer: usize) -> f64 {
        self.start + (layer + 1) as f64 * self.range
    }

    /// `range` in seconds.
    pub fn range_seconds(&self) -> f64 {
        self.range * 1e-6
    }
}

pub fn build_labits(stream: &EventStream, config: &LabitsConfig) -> Result<DenseTensor, ReprError> {
    build(stream, config, Threading::Single)
}

pub(crate) fn build(
    stream: &EventStream,
    config: &LabitsConfig,
    threading: Threading,
) -> Result<DenseTensor, ReprError> {
    let window = config.window.resolve(stream)?;
    let probes = LabitsProbes::new(&window, config.bins)?;
    let geom = stream.geometry();
    let mut out = DenseTensor::filled(config.bins, geom.height(), geom.width(), FILL);
    let events = stream.events();
    let width = geom.width();
    let future = config.future;

    for_each_chunk(out.as_mut_slice(), geom.pixels(), threading, |layer, plane| {
        fill_layer(plane, width, events, &probes, layer, future);
    });
    Ok(out)
}

fn fill_layer(
    plane: &mut [f32],
    width: usize,
    events: &[Event],
    probes: &LabitsProbes,
    layer: usize,
    future: FutureSelection,
) {
    let tau = probes.probe(layer);
    let range = probes.range;
    let past_lo = tau - range;
    let future_hi = tau + range;

    let lo = events.partition_point(|e| (e.t as f64) < past_lo);
    let mid = events.partition_point(|e| (e.t as f64) <= tau);
    let hi = events.partition_point(|e| (e.t as f64) <= future_hi);
    let past = &events[lo..mid.max(lo)];
    let ahead = &events[mid..hi.max(mid)];

    let norm = |e: &Event| (((e.t as f64) - tau) / range).clamp(-1.0, 1.0) as f32;
    let mut put = |e: &Event| plane[e.y as usize * width + e.x as usize] = norm(e);

    // Future first so that any past event overrides it; reverse order makes
    // the earliest future event the surviving write.
    match future {
        FutureSelection::Earliest => ahead.iter().rev().for_each(&mut put),
        FutureSelection::Latest => ahead.iter().for_each(&mut put),
    }
    past.iter().for_each(&mut put);
}
