//! Timing harness comparing the representation builders on identical packets.
//!
//! Each builder is timed on every packet `repeats` times after `warmup`
//! untimed calls; the per-packet figure is the median of the repeats.
//! Builders alternate packet by packet rather than running back to back. Timings
//! cover the full build call including allocation of the output tensor.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;
use thiserror::Error;

use crate::event::{EventStream, Polarity, SensorGeometry, TimeWindow};
use crate::repr::{LabitsConfig, ReprError, Representation, Threading, ToreConfig, VoxelConfig, WindowSpec};
use crate::synth::{emit_events, MotionModel, SceneObject, Shape, SynthError, SyntheticScene};
use crate::tensor::DenseTensor;

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("packet_count must be at least 1")]
    NoPackets,
    #[error("repeats must be at least 1")]
    NoRepeats,
    #[error("packet {0} is degenerate")]
    DegenerateStream(usize),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub packet_count: usize,
    /// Microseconds.
    pub packet_duration: u64,
    pub sensor_width: usize,
    pub sensor_height: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub labits_bins: usize,
    pub voxel_bins: usize,
    pub tore_depth: usize,
    /// Also time every builder with internal parallelism enabled.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            packet_count: 50,
            packet_duration: 100_000,
            sensor_width: 240,
            sensor_height: 180,
            repeats: 3,
            warmup: 1,
            labits_bins: 65,
            voxel_bins: 65,
            tore_depth: 3,
            parallel: false,
        }
    }
}

impl BenchConfig {
    pub fn representations(&self) -> Vec<Representation> {
        vec![
            Representation::Labits(LabitsConfig::new(self.labits_bins)),
            Representation::Voxel(VoxelConfig::new(self.voxel_bins)),
            Representation::Tore(ToreConfig::new(self.tore_depth)),
            Representation::TimeSurface(WindowSpec::Natural),
            Representation::EventFrame,
            Representation::EventCount,
        ]
    }

    fn modes(&self) -> Vec<Threading> {
        if self.parallel {
            vec![Threading::Single, Threading::Parallel]
        } else {
            vec![Threading::Single]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub name: String,
    pub threading: String,
    pub config: String,
    pub mean_s: f64,
    pub median_s: f64,
    pub p95_s: f64,
    pub events_per_s: f64,
    /// FNV-1a over the output bits of every packet, in packet order.
    pub checksum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub machine: String,
    pub packet_count: usize,
    pub total_events: usize,
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
}

pub fn machine_descriptor() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{}-{}, {} hardware threads", std::env::consts::OS, std::env::consts::ARCH, threads)
}

/// Random packets of moving edges, orbiting dot clouds and hot pixels,
/// fully determined by `seed`.
pub fn synth_packets(config: &BenchConfig, seed: u64) -> Result<Vec<EventStream>, BenchError> {
    if config.packet_count == 0 {
        return Err(BenchError::NoPackets);
    }
    let geometry = SensorGeometry::new(config.sensor_width, config.sensor_height).map_err(SynthError::from)?;
    let window = TimeWindow::new(0, config.packet_duration.max(1)).map_err(SynthError::from)?;
    (0..config.packet_count)
        .map(|i| {
            let mut rng = SplitMix64::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let scene = random_scene(&mut rng, geometry, window);
            Ok(emit_events(&scene, rng.random())?)
        })
        .collect()
}

fn random_scene(rng: &mut SplitMix64, geometry: SensorGeometry, window: TimeWindow) -> SyntheticScene {
    let (w, h) = (geometry.width() as f64, geometry.height() as f64);
    let mut scene = SyntheticScene::new(geometry, window);
    let sign = |rng: &mut SplitMix64| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let polarity = |rng: &mut SplitMix64| {
        if rng.random_bool(0.5) {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    };

    for _ in 0..rng.random_range(4..=8) {
        let motion = MotionModel::ConstantVelocity {
            vx: sign(rng) * rng.random_range(50.0..400.0),
            vy: sign(rng) * rng.random_range(0.0..100.0),
        };
        let shape = Shape::VerticalEdge {
            x0: rng.random_range(0.0..w),
        };
        let p = polarity(rng);
        scene.objects.push(SceneObject::new(shape, motion).with_polarity(p));
    }
    for _ in 0..rng.random_range(2..=4) {
        let cx = rng.random_range(0.0..w);
        let cy = rng.random_range(0.0..h);
        let points = (0..200)
            .map(|_| [cx + rng.random_range(-20.0..20.0), cy + rng.random_range(-20.0..20.0)])
            .collect();
        let motion = MotionModel::Circular {
            radius: rng.random_range(5.0..20.0),
            angular_rate: sign(rng) * rng.random_range(5.0..20.0),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        };
        let p = polarity(rng);
        scene.objects.push(SceneObject::new(Shape::PointCloud { points }, motion).with_polarity(p));
    }
    for _ in 0..2 {
        let x = rng.random_range(0..geometry.width()) as u16;
        let y = rng.random_range(0..geometry.height()) as u16;
        let rate = rng.random_range(500.0..2000.0);
        scene = scene.with_hot_pixel(x, y, rate);
    }
    scene
}

fn describe(rep: &Representation) -> String {
    match rep {
        Representation::Labits(c) => format!("B={}", c.bins),
        Representation::Voxel(c) => format!("B={}", c.bins),
        Representation::Tore(c) => format!("K={}", c.depth),
        _ => String::new(),
    }
}

fn fnv1a(hash: &mut u64, tensor: &DenseTensor) {
    for v in tensor.as_slice() {
        for b in v.to_bits().to_le_bytes() {
            *hash ^= b as u64;
            *hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

/// Hash used for [`BenchRow::checksum`], over a sequence of outputs.
pub fn checksum<'a>(tensors: impl IntoIterator<Item = &'a DenseTensor>) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325;
    for t in tensors {
        fnv1a(&mut hash, t);
    }
    hash
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn run_bench(streams: &[EventStream], config: &BenchConfig) -> Result<BenchReport, BenchError> {
    if streams.is_empty() || config.packet_count == 0 {
        return Err(BenchError::NoPackets);
    }
    if config.repeats == 0 {
        return Err(BenchError::NoRepeats);
    }
    if let Some(i) = streams.iter().position(|s| s.natural_window().is_err()) {
        return Err(BenchError::DegenerateStream(i));
    }
    let total_events: usize = streams.iter().map(EventStream::len).sum();

    let reps = config.representations();
    let mut rows = Vec::new();
    for threading in config.modes() {
        // builders take turns on each packet so slow drift in machine load
        // affects all of them alike
        let mut per_packet = vec![Vec::with_capacity(streams.len()); reps.len()];
        let mut hashes = vec![0xcbf2_9ce4_8422_2325u64; reps.len()];
        for stream in streams {
            for (r, rep) in reps.iter().enumerate() {
                for _ in 0..config.warmup {
                    std::hint::black_box(rep.build(stream, threading)?);
                }
                let mut times = Vec::with_capacity(config.repeats);
                let mut last = None;
                for _ in 0..config.repeats {
                    let start = Instant::now();
                    let out = std::hint::black_box(rep.build(stream, threading)?);
                    times.push(start.elapsed().as_secs_f64());
                    last = Some(out);
                }
                if let Some(out) = &last {
                    fnv1a(&mut hashes[r], out);
                }
                times.sort_by(f64::total_cmp);
                per_packet[r].push(median(&times));
            }
        }
        for ((rep, mut times), hash) in reps.iter().zip(per_packet).zip(hashes) {
            let total: f64 = times.iter().sum();
            let mean = total / times.len() as f64;
            times.sort_by(f64::total_cmp);
            rows.push(BenchRow {
                name: rep.name().to_string(),
                threading: match threading {
                    Threading::Single => "single",
                    Threading::Parallel => "parallel",
                }
                .to_string(),
                config: describe(rep),
                mean_s: mean,
                median_s: median(&times),
                p95_s: percentile(&times, 0.95),
                events_per_s: if total > 0.0 { total_events as f64 / total } else { f64::INFINITY },
                checksum: hash,
            });
        }
    }
    Ok(BenchReport {
        machine: machine_descriptor(),
        packet_count: streams.len(),
        total_events,
        config: config.clone(),
        rows,
    })
}

impl BenchReport {
    pub fn row(&self, name: &str, threading: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.name == name && r.threading == threading)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} packets, {} events, {}",
            self.packet_count, self.total_events, self.machine
        );
        let _ = writeln!(
            out,
            "{:<14} {:<9} {:<6} {:>11} {:>11} {:>11} {:>14}",
            "representation", "threads", "config", "mean_s", "median_s", "p95_s", "events/s"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:<9} {:<6} {:>11.6} {:>11.6} {:>11.6} {:>14.0}",
                r.name, r.threading, r.config, r.mean_s, r.median_s, r.p95_s, r.events_per_s
            );
        }
        out
    }

    /// One JSON object per row.
    pub fn to_json_lines(&self) -> String {
        self.rows
            .iter()
            .map(|r| {
                let mut line = serde_json::to_string(r).expect("rows serialize");
                line.push('\n');
                line
            })
            .collect()
    }
}
