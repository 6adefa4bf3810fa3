//! Dense representations built from an [`EventStream`].
//!
//! Every builder fills its output one channel (or one row band) at a time and
//! visits events in stream order inside that unit, so results do not depend on
//! [`Threading`].

mod baseline;
mod labits;

use rayon::prelude::*;
use thiserror::Error;

use crate::event::{EventStream, TimeWindow};
use crate::tensor::DenseTensor;

pub use baseline::{
    build_event_count, build_event_frame, build_time_surface, build_tore, build_voxel_grid,
    ToreConfig, VoxelConfig,
};
pub use labits::{build_labits, FutureSelection, LabitsConfig, LabitsProbes};

/// Value written where a representation has no event.
pub const FILL: f32 = -1.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReprError {
    #[error("time window is degenerate (needs at least two events over a non-zero duration)")]
    DegenerateWindow,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

/// Either an explicit window or `[t_first, t_last]` of the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowSpec {
    #[default]
    Natural,
    Explicit(TimeWindow),
}

impl WindowSpec {
    pub fn resolve(&self, stream: &EventStream) -> Result<TimeWindow, ReprError> {
        match self {
            WindowSpec::Explicit(w) => Ok(*w),
            WindowSpec::Natural => stream.natural_window().map_err(|_| ReprError::DegenerateWindow),
        }
    }
}

impl From<TimeWindow> for WindowSpec {
    fn from(w: TimeWindow) -> Self {
        WindowSpec::Explicit(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threading {
    #[default]
    Single,
    /// Split work across the rayon pool.
    Parallel,
}

/// Builder dispatch used by the CLI and the benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Representation {
    Labits(LabitsConfig),
    Voxel(VoxelConfig),
    Tore(ToreConfig),
    TimeSurface(WindowSpec),
    EventFrame,
    EventCount,
}

impl Representation {
    pub fn name(&self) -> &'static str {
        match self {
            Representation::Labits(_) => "labits",
            Representation::Voxel(_) => "voxel",
            Representation::Tore(_) => "tore",
            Representation::TimeSurface(_) => "time_surface",
            Representation::EventFrame => "event_frame",
            Representation::EventCount => "event_count",
        }
    }

    pub fn build(&self, stream: &EventStream, threading: Threading) -> Result<DenseTensor, ReprError> {
        match self {
            Representation::Labits(cfg) => labits::build(stream, cfg, threading),
            Representation::Voxel(cfg) => baseline::voxel(stream, cfg, threading),
            Representation::Tore(cfg) => baseline::tore(stream, cfg, threading),
            Representation::TimeSurface(w) => baseline::time_surface(stream, w, threading),
            Representation::EventFrame => Ok(baseline::event_frame(stream, threading)),
            Representation::EventCount => Ok(baseline::event_count(stream, threading)),
        }
    }
}

/// Runs `kernel(index, chunk)` over `chunk_len`-sized pieces of `data`.
pub(crate) fn for_each_chunk<F>(data: &mut [f32], chunk_len: usize, threading: Threading, kernel: F)
where
    F: Fn(usize, &mut [f32]) + Sync + Send,
{
    if chunk_len == 0 {
        return;
    }
    match threading {
        Threading::Single => data
            .chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| kernel(i, c)),
        Threading::Parallel => data
            .par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| kernel(i, c)),
    }
}
