//! Synthetic moving scenes with exact events, flows and trajectories.
//!
//! Objects are sets of points translated by a motion model. An ideal sensor
//! fires one event each time a point's x or y coordinate crosses an integer,
//! at the pixel the point occupies at that instant. Crossings are collected
//! over the half-open scene window `[t_start, t_end)` and timestamps are
//! rounded to the nearest microsecond.
//!
//! Hot pixels fire as Poisson processes driven by SplitMix64 (increment
//! `0x9E3779B97F4A7C15`, multipliers `0xBF58476D1CE4E5B9` and
//! `0x94D049BB133111EB`, shifts 30/27/31); each uniform draw is
//! `(next_u64 >> 11) * 2^-53` and the gap to the next event is
//! `-ln(1 - u) / rate`. One generator is seeded per emission and consumed in
//! hot-pixel order.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use thiserror::Error;

use crate::event::{Event, EventError, EventStream, Polarity, SensorGeometry, TimeWindow};
use crate::flow::FlowField;
use crate::trajectory::{fit_bezier, BezierTrajectoryField, TrajectoryError, TrajectoryGroundTruth};

/// Sampling step (seconds) used to bracket crossings of non-linear motion.
const BRACKET_STEP: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("no object emits any event")]
    EmptyScene,
    #[error("invalid motion: {0}")]
    BadMotion(String),
    #[error("invalid scene: {0}")]
    BadScene(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Event(#[from] EventError),
}

/// Translation of an object relative to its pose at the window start.
///
/// `s` is seconds since the window start; every model has zero displacement
/// at `s = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionModel {
    /// Pixels per second.
    ConstantVelocity { vx: f64, vy: f64 },
    /// Travels a circle of `radius` px at `angular_rate` rad/s, starting at
    /// angle `phase`.
    Circular { radius: f64, angular_rate: f64, phase: f64 },
    /// Entry `k` is the `k`-th time derivative of the displacement at the
    /// window start (px/s^k). Entry 0 must be zero.
    Polynomial { x: Vec<f64>, y: Vec<f64> },
}

impl MotionModel {
    pub fn validate(&self) -> Result<(), SynthError> {
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match self {
            MotionModel::ConstantVelocity { vx, vy } if !finite(&[*vx, *vy]) => {
                Err(SynthError::BadMotion("velocity must be finite".into()))
            }
            MotionModel::Circular { radius, angular_rate, phase } => {
                if !finite(&[*radius, *angular_rate, *phase]) || *radius < 0.0 {
                    Err(SynthError::BadMotion("circular motion needs a finite radius >= 0".into()))
                } else {
                    Ok(())
                }
            }
            MotionModel::Polynomial { x, y } => {
                if !finite(x) || !finite(y) {
                    Err(SynthError::BadMotion("polynomial coefficients must be finite".into()))
                } else if x.first().is_some_and(|&c| c != 0.0) || y.first().is_some_and(|&c| c != 0.0) {
                    Err(SynthError::BadMotion("polynomial displacement must start at zero".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn displacement(&self, s: f64) -> [f64; 2] {
        match self {
            MotionModel::ConstantVelocity { vx, vy } => [vx * s, vy * s],
            MotionModel::Circular { radius, angular_rate, phase } => {
                let a = phase + angular_rate * s;
                [radius * (a.cos() - phase.cos()), radius * (a.sin() - phase.sin())]
            }
            MotionModel::Polynomial { x, y } => [taylor(x, s, 0), taylor(y, s, 0)],
        }
    }

    pub fn velocity(&self, s: f64) -> [f64; 2] {
        match self {
            MotionModel::ConstantVelocity { vx, vy } => [*vx, *vy],
            MotionModel::Circular { radius, angular_rate, phase } => {
                let a = phase + angular_rate * s;
                [-radius * angular_rate * a.sin(), radius * angular_rate * a.cos()]
            }
            MotionModel::Polynomial { x, y } => [taylor(x, s, 1), taylor(y, s, 1)],
        }
    }

    /// Whether the given axis (0 = x, 1 = y) never moves.
    fn is_static(&self, axis: usize) -> bool {
        match self {
            MotionModel::ConstantVelocity { vx, vy } => [*vx, *vy][axis] == 0.0,
            MotionModel::Circular { radius, angular_rate, .. } => *radius == 0.0 || *angular_rate == 0.0,
            MotionModel::Polynomial { x, y } => [x, y][axis].iter().all(|&c| c == 0.0),
        }
    }
}

/// `sum_k c_k s^(k - skip) / (k - skip)!` over `k >= max(1, skip)`.
fn taylor(coeffs: &[f64], s: f64, skip: usize) -> f64 {
    let mut total = 0.0;
    let mut term = 1.0; // s^j / j!
    for (j, &c) in coeffs.iter().skip(skip).enumerate() {
        if j > 0 {
            term *= s / j as f64;
        }
        if j + skip >= 1 {
            total += c * term;
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// One point per sensor row at column `x0`.
    VerticalEdge { x0: f64 },
    /// Explicit points in pixel coordinates at the window start.
    PointCloud { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    pub motion: MotionModel,
    pub polarity: Polarity,
}

impl SceneObject {
    pub fn new(shape: Shape, motion: MotionModel) -> Self {
        Self {
            shape,
            motion,
            polarity: Polarity::Positive,
        }
    }

    pub fn with_polarity(mut self, polarity: Polarity) -> Self {
        self.polarity = polarity;
        self
    }

    fn start_points(&self, geometry: &SensorGeometry) -> Vec<[f64; 2]> {
        match &self.shape {
            Shape::VerticalEdge { x0 } => (0..geometry.height()).map(|y| [*x0, y as f64]).collect(),
            Shape::PointCloud { points } => points.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotPixel {
    pub x: u16,
    pub y: u16,
    /// Events per second.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub geometry: SensorGeometry,
    pub window: TimeWindow,
    pub objects: Vec<SceneObject>,
    pub hot_pixels: Vec<HotPixel>,
}

impl SyntheticScene {
    pub fn new(geometry: SensorGeometry, window: TimeWindow) -> Self {
        Self {
            geometry,
            window,
            objects: Vec::new(),
            hot_pixels: Vec::new(),
        }
    }

    pub fn with_object(mut self, object: SceneObject) -> Self {
        self.objects.push(object);
        self
    }

    pub fn with_hot_pixel(mut self, x: u16, y: u16, rate: f64) -> Self {
        self.hot_pixels.push(HotPixel { x, y, rate });
        self
    }

    /// Vertical edge at `x0` moving with constant velocity.
    pub fn moving_edge(geometry: SensorGeometry, window: TimeWindow, x0: f64, vx: f64, vy: f64) -> Self {
        Self::new(geometry, window).with_object(SceneObject::new(
            Shape::VerticalEdge { x0 },
            MotionModel::ConstantVelocity { vx, vy },
        ))
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for obj in &self.objects {
            obj.motion.validate()?;
            if let Shape::PointCloud { points } = &obj.shape {
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(SynthError::BadScene("point coordinates must be finite".into()));
                }
            }
            if let Shape::VerticalEdge { x0 } = obj.shape {
                if !x0.is_finite() {
                    return Err(SynthError::BadScene("edge position must be finite".into()));
                }
            }
        }
        for hp in &self.hot_pixels {
            if !self.geometry.contains(hp.x as i64, hp.y as i64) {
                return Err(SynthError::BadScene(format!("hot pixel ({}, {}) outside sensor", hp.x, hp.y)));
            }
            if !(hp.rate > 0.0 && hp.rate.is_finite()) {
                return Err(SynthError::BadScene(format!("hot pixel rate {} must be positive", hp.rate)));
            }
        }
        Ok(())
    }

    /// Window length in seconds.
    pub fn duration_s(&self) -> f64 {
        self.window.duration() as f64 * 1e-6
    }
}

struct Tagged {
    event: Event,
    source: usize,
}

/// Renders the scene into a sorted event stream.
///
/// Ties are ordered by (source, y, x) where objects come first in declaration
/// order, followed by hot pixels. Events falling outside the sensor are
/// dropped.
pub fn emit_events(scene: &SyntheticScene, seed: u64) -> Result<EventStream, SynthError> {
    scene.validate()?;
    let g = scene.geometry;
    let span = scene.duration_s();
    let t0 = scene.window.start();
    let to_timestamp = |s: f64| t0 + (s * 1e6).round() as u64;

    let mut tagged = Vec::new();
    for (source, obj) in scene.objects.iter().enumerate() {
        for start in obj.start_points(&g) {
            for axis in 0..2 {
                if obj.motion.is_static(axis) {
                    continue;
                }
                for s in crossing_times(&obj.motion, start, axis, span) {
                    let d = obj.motion.displacement(s);
                    let mut pos = [(start[0] + d[0]).round(), (start[1] + d[1]).round()];
                    // the crossing coordinate is an integer by construction
                    pos[axis] = (start[axis] + d[axis]).round();
                    let t = to_timestamp(s);
                    if t >= scene.window.end() || !g.contains(pos[0] as i64, pos[1] as i64) {
                        continue;
                    }
                    tagged.push(Tagged {
                        event: Event::new(t, pos[0] as u16, pos[1] as u16, obj.polarity),
                        source,
                    });
                }
            }
        }
    }
    if tagged.is_empty() {
        return Err(SynthError::EmptyScene);
    }

    let mut rng = SplitMix64::seed_from_u64(seed);
    for (i, hp) in scene.hot_pixels.iter().enumerate() {
        let mut s = 0.0;
        loop {
            let u: f64 = rng.random();
            s += -(1.0 - u).ln() / hp.rate;
            if s >= span {
                break;
            }
            let t = to_timestamp(s);
            if t < scene.window.end() {
                tagged.push(Tagged {
                    event: Event::new(t, hp.x, hp.y, Polarity::Positive),
                    source: scene.objects.len() + i,
                });
            }
        }
    }

    tagged.sort_by_key(|e| (e.event.t, e.source, e.event.y, e.event.x));
    Ok(EventStream::new(g, tagged.into_iter().map(|e| e.event).collect())?)
}

/// Times in `[0, span)` at which `start[axis] + displacement(s)[axis]` is an
/// integer. A point starting on an integer fires at `s = 0`.
fn crossing_times(motion: &MotionModel, start: [f64; 2], axis: usize, span: f64) -> Vec<f64> {
    let coord = |s: f64| start[axis] + motion.displacement(s)[axis];
    if let MotionModel::ConstantVelocity { vx, vy } = motion {
        let v = [*vx, *vy][axis];
        let p0 = start[axis];
        let p1 = p0 + v * span;
        let (lo, hi) = if v > 0.0 { (p0.ceil(), p1) } else { (p1, p0.floor()) };
        let mut out = Vec::new();
        let mut k = if v > 0.0 { lo } else { hi };
        while (v > 0.0 && k < hi) || (v < 0.0 && k > lo) {
            out.push((k - p0) / v);
            k += v.signum();
        }
        return out;
    }

    let steps = (span / BRACKET_STEP).ceil().max(1.0) as usize;
    let mut out = Vec::new();
    let mut a = 0.0;
    let mut ca = coord(a);
    for i in 1..=steps {
        let b = (i as f64 * BRACKET_STEP).min(span);
        let cb = coord(b);
        // integers k reached in [a, b): k == ca counts, k == cb belongs to the next step
        let (first, last, rising) = if cb >= ca {
            (ca.ceil(), cb, true)
        } else {
            (ca.floor(), cb, false)
        };
        let mut k = first;
        while (rising && k < last) || (!rising && k > last) {
            out.push(if k == ca { a } else { bisect(&coord, a, b, k) });
            k += if rising { 1.0 } else { -1.0 };
        }
        a = b;
        ca = cb;
    }
    out
}

fn bisect(coord: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, k: f64) -> f64 {
    let rising = coord(b) > coord(a);
    for _ in 0..64 {
        let m = 0.5 * (a + b);
        if (coord(m) < k) == rising {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Exact flows of a scene, indexed by start pixel.
///
/// A pixel belongs to the first object (in declaration order) with a point
/// rounding onto it at the window start. Uncovered pixels are invalid.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    scene: SyntheticScene,
    owner: Vec<Option<usize>>,
}

pub fn ground_truth(scene: &SyntheticScene) -> GroundTruth {
    let g = scene.geometry;
    let mut owner = vec![None; g.pixels()];
    for (i, obj) in scene.objects.iter().enumerate() {
        for p in obj.start_points(&g) {
            let (x, y) = (p[0].round(), p[1].round());
            if g.contains(x as i64, y as i64) {
                let cell = &mut owner[g.index(x as usize, y as usize)];
                cell.get_or_insert(i);
            }
        }
    }
    GroundTruth {
        scene: scene.clone(),
        owner,
    }
}

impl GroundTruth {
    pub fn scene(&self) -> &SyntheticScene {
        &self.scene
    }

    fn field(&self, f: impl Fn(&MotionModel) -> [f64; 2]) -> FlowField {
        let g = self.scene.geometry;
        let per_object: Vec<[f64; 2]> = self.scene.objects.iter().map(|o| f(&o.motion)).collect();
        FlowField::from_fn(g.height(), g.width(), |x, y| {
            self.owner[g.index(x, y)].map(|i| per_object[i])
        })
    }

    /// Cumulative displacement from the window start to `tau` seconds later.
    pub fn flow_at(&self, tau: f64) -> FlowField {
        self.field(|m| m.displacement(tau))
    }

    /// Instantaneous velocity (px/s) `tau` seconds after the window start.
    pub fn velocity_at(&self, tau: f64) -> FlowField {
        self.field(|m| m.velocity(tau))
    }

    /// Displacement of the point starting at pixel `(x, y)`.
    pub fn trajectory(&self, x: usize, y: usize, tau: f64) -> Option<[f64; 2]> {
        let g = self.scene.geometry;
        if x >= g.width() || y >= g.height() {
            return None;
        }
        self.owner[g.index(x, y)].map(|i| self.scene.objects[i].motion.displacement(tau))
    }

    /// Cumulative flows at `k / samples` of the window for `k = 1..=samples`.
    pub fn trajectory_samples(&self, samples: usize) -> Result<TrajectoryGroundTruth, TrajectoryError> {
        let span = self.scene.duration_s();
        let times: Vec<f64> = (1..=samples).map(|k| k as f64 / samples as f64).collect();
        let flows = times.iter().map(|&t| self.flow_at(t * span)).collect();
        TrajectoryGroundTruth::new(times, flows)
    }

    /// Least-squares Bézier fit of the exact trajectories over the window.
    pub fn bezier_field(&self, degree: usize, samples: usize) -> Result<BezierTrajectoryField, TrajectoryError> {
        let gt = self.trajectory_samples(samples)?;
        fit_bezier(&gt, degree, self.scene.window.start(), self.scene.window.end())
    }
}

/// Parses the flat `key = value` scene format.
///
/// ```text
/// # comment
/// width = 64
/// height = 48
/// t_start = 0                 # microseconds, optional
/// t_end = 100000
/// object = edge x0=3 motion=constant vx=100 vy=0
/// object = points at=10:12,11:12 motion=circular radius=5 rate=6.5 phase=0 polarity=-1
/// object = edge x0=2 motion=polynomial x=0,100,200 y=0
/// hot_pixel = 5 7 1000        # x y rate
/// ```
pub fn parse_scene(text: &str) -> Result<SyntheticScene, SynthError> {
    let mut width = None;
    let mut height = None;
    let mut t_start = 0u64;
    let mut t_end = None;
    let mut objects = Vec::new();
    let mut hot_pixels = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| SynthError::Parse { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err("expected `key = value`".into()))?;
        match key {
            "width" => width = Some(parse_num::<usize>(value).map_err(err)?),
            "height" => height = Some(parse_num::<usize>(value).map_err(err)?),
            "t_start" => t_start = parse_num::<u64>(value).map_err(err)?,
            "t_end" => t_end = Some(parse_num::<u64>(value).map_err(err)?),
            "object" => objects.push(parse_object(value).map_err(err)?),
            "hot_pixel" => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(err("hot_pixel expects `x y rate`".into()));
                }
                hot_pixels.push(HotPixel {
                    x: parse_num(parts[0]).map_err(err)?,
                    y: parse_num(parts[1]).map_err(err)?,
                    rate: parse_num(parts[2]).map_err(err)?,
                });
            }
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }

    let missing = |what: &str| SynthError::Parse {
        line: 0,
        message: format!("missing `{what}`"),
    };
    let geometry = SensorGeometry::new(width.ok_or_else(|| missing("width"))?, height.ok_or_else(|| missing("height"))?)?;
    let window = TimeWindow::new(t_start, t_end.ok_or_else(|| missing("t_end"))?)?;
    let scene = SyntheticScene {
        geometry,
        window,
        objects,
        hot_pixels,
    };
    scene.validate()?;
    Ok(scene)
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse::<T>().map_err(|_| format!("invalid number `{s}`"))
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(parse_num::<f64>).collect()
}

fn parse_object(spec: &str) -> Result<SceneObject, String> {
    let mut tokens = spec.split_whitespace();
    let kind = tokens.next().ok_or("empty object")?;
    let mut fields = std::collections::BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected `name=value`, got `{tok}`"))?;
        if fields.insert(k, v).is_some() {
            return Err(format!("duplicate field `{k}`"));
        }
    }
    let mut take = |name: &str| fields.remove(name).ok_or_else(|| format!("missing field `{name}`"));

    let shape = match kind {
        "edge" => Shape::VerticalEdge { x0: parse_num(take("x0")?)? },
        "points" => {
            let points = take("at")?
                .split(',')
                .map(|pair| {
                    let (x, y) = pair.split_once(':').ok_or_else(|| format!("expected `x:y`, got `{pair}`"))?;
                    Ok([parse_num::<f64>(x)?, parse_num::<f64>(y)?])
                })
                .collect::<Result<Vec<_>, String>>()?;
            Shape::PointCloud { points }
        }
        other => return Err(format!("unknown object kind `{other}`")),
    };
    let motion = match take("motion")? {
        "constant" => MotionModel::ConstantVelocity {
            vx: parse_num(take("vx")?)?,
            vy: parse_num(take("vy")?)?,
        },
        "circular" => MotionModel::Circular {
            radius: parse_num(take("radius")?)?,
            angular_rate: parse_num(take("rate")?)?,
            phase: take("phase").map_or(Ok(0.0), parse_num)?,
        },
        "polynomial" => MotionModel::Polynomial {
            x: parse_list(take("x")?)?,
            y: parse_list(take("y")?)?,
        },
        other => return Err(format!("unknown motion `{other}`")),
    };
    let polarity = match take("polarity") {
        Ok(p) => Polarity::from_raw(parse_num::<i64>(p)?).ok_or_else(|| format!("invalid polarity `{p}`"))?,
        Err(_) => Polarity::Positive,
    };
    if let Some(k) = fields.keys().next() {
        return Err(format!("unknown field `{k}`"));
    }
    Ok(SceneObject { shape, motion, polarity })
}

impl fmt::Display for MotionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MotionModel::ConstantVelocity { vx, vy } => write!(f, "constant({vx}, {vy}) px/s"),
            MotionModel::Circular { radius, angular_rate, phase } => {
                write!(f, "circular(r={radius} px, w={angular_rate} rad/s, phase={phase})")
            }
            MotionModel::Polynomial { x, y } => write!(f, "polynomial(x={x:?}, y={y:?})"),
        }
    }
}
