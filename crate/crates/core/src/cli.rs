//! Command-line front end. Every subcommand is a thin wrapper over a library
//! call; exit codes are 0 on success, 2 for usage, parse and I/O problems and
//! 3 for domain errors such as an empty scene or a degenerate window.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::aplof::{aplof_from_labits, aplof_ground_truth, apm_high, mean_l1, AplofError, PlaneFitConfig, DEFAULT_BETA};
use crate::bench::{run_bench, synth_packets, BenchConfig, BenchError};
use crate::event::{EventError, EventStream, SensorGeometry, TimeWindow};
use crate::flow::FlowField;
use crate::repr::{
    FutureSelection, LabitsConfig, ReprError, Representation, Threading, ToreConfig, VoxelConfig, WindowSpec,
};
use crate::synth::{emit_events, ground_truth, parse_scene, SynthError};
use crate::tensor::DenseTensor;
use crate::trajectory::{
    bezier_eval, trajectory_metrics, two_view_metrics, BezierTrajectoryField, TrajectoryError,
    TrajectoryGroundTruth, DEFAULT_DEGREE,
};
use crate::viz::{render_layer, Colormap, ValueRange};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "labits", version, about = "Event-camera representations, local flow and trajectory tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene description into events and exact ground truth.
    Synth(SynthArgs),
    /// Build a dense representation from an event file.
    Repr(ReprArgs),
    /// Estimate local flow (px/s) on one Labits layer.
    Aplof(AplofArgs),
    /// Score a Bézier trajectory field against ground-truth flows.
    Traj(TrajArgs),
    /// Dump one tensor layer as a PGM/PPM image.
    Viz(VizArgs),
    /// Time every builder on synthetic packets.
    Bench(BenchArgs),
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Scene description file.
    pub scene: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output events; `.csv` writes text, anything else binary.
    #[arg(long)]
    pub events: PathBuf,
    /// Seconds after the window start at which to write cumulative flows.
    #[arg(long, value_delimiter = ',')]
    pub flows: Vec<f64>,
    /// Seconds after the window start at which to write velocities (px/s).
    #[arg(long, value_delimiter = ',')]
    pub velocities: Vec<f64>,
    /// Directory for flow files (default: next to the event file).
    #[arg(long)]
    pub flow_dir: Option<PathBuf>,
    /// Write a Bézier fit of the exact trajectories over the whole window.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DEGREE)]
    pub degree: usize,
    /// Evenly spaced trajectory samples used by the fit.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Labits,
    Voxel,
    Tore,
    Ts,
    Frame,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FutureArg {
    Earliest,
    Latest,
}

#[derive(Debug, clap::Args)]
pub struct ReprArgs {
    /// Event file (binary, or `.csv` with --width/--height).
    pub events: PathBuf,
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Temporal bins (labits, voxel).
    #[arg(long)]
    pub bins: Option<usize>,
    /// Timestamps kept per polarity (tore).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Window start, microseconds (requires --t1).
    #[arg(long, requires = "t1")]
    pub t0: Option<u64>,
    /// Window end, microseconds (requires --t0).
    #[arg(long, requires = "t0")]
    pub t1: Option<u64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Labits future-event rule.
    #[arg(long, value_enum, default_value = "earliest")]
    pub future: FutureArg,
    #[arg(long)]
    pub parallel: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct AplofArgs {
    /// Labits tensor file.
    pub labits: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    /// Probe spacing of the tensor, seconds.
    #[arg(long)]
    pub tau_range: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = 5)]
    pub patch: usize,
    #[arg(long, default_value_t = 6)]
    pub min_support: usize,
    /// Reference to score against: either one velocity field (px/s) at the
    /// estimate's pixels, or three cumulative flows at tau - 10 ms,
    /// tau + 10 ms and tau, which are scattered to the active pixels.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub gt: Vec<PathBuf>,
    #[arg(long)]
    pub json_lines: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct TrajArgs {
    /// Predicted Bézier field.
    pub pred: PathBuf,
    /// Ground-truth flow files, one per time.
    #[arg(long, value_delimiter = ',', required = true)]
    pub gt: Vec<PathBuf>,
    /// Normalized times of the ground-truth flows.
    #[arg(long, value_delimiter = ',', required = true)]
    pub times: Vec<f64>,
    #[arg(long)]
    pub json_lines: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColormapArg {
    Gray,
    Viridis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RangeArg {
    /// [-1, 1] affine (Labits family).
    Fixed,
    /// Per-layer min-max over non-fill values.
    Minmax,
}

#[derive(Debug, clap::Args)]
pub struct VizArgs {
    pub tensor: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long, value_enum, default_value = "gray")]
    pub colormap: ColormapArg,
    #[arg(long, value_enum, default_value = "fixed")]
    pub range: RangeArg,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 50)]
    pub packets: usize,
    /// Packet length, microseconds.
    #[arg(long, default_value_t = 100_000)]
    pub packet_duration: u64,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub warmup: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 65)]
    pub labits_bins: usize,
    #[arg(long, default_value_t = 65)]
    pub voxel_bins: usize,
    #[arg(long, default_value_t = 3)]
    pub tore_depth: usize,
    #[arg(long, default_value_t = 240)]
    pub width: usize,
    #[arg(long, default_value_t = 180)]
    pub height: usize,
    /// Also time with internal parallelism enabled.
    #[arg(long)]
    pub parallel: bool,
    /// Print one JSON record per row instead of the table.
    #[arg(long)]
    pub json_lines: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Domain(_) => EXIT_DOMAIN,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => m,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn domain(err: impl std::fmt::Display) -> CliError {
    CliError::Domain(err.to_string())
}

impl From<EventError> for CliError {
    fn from(err: EventError) -> Self {
        match err {
            EventError::DegenerateStream | EventError::DegenerateWindow(..) => domain(err),
            _ => usage(err.to_string()),
        }
    }
}

impl From<ReprError> for CliError {
    fn from(err: ReprError) -> Self {
        match err {
            ReprError::DegenerateWindow => domain(err),
            ReprError::BadConfig(_) => usage(err.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(err: SynthError) -> Self {
        match err {
            SynthError::EmptyScene => domain(err),
            _ => usage(err.to_string()),
        }
    }
}

impl From<AplofError> for CliError {
    fn from(err: AplofError) -> Self {
        match err {
            AplofError::NoValidPixels | AplofError::DimMismatch(_) => domain(err),
            _ => usage(err.to_string()),
        }
    }
}

impl From<TrajectoryError> for CliError {
    fn from(err: TrajectoryError) -> Self {
        match err {
            TrajectoryError::BadParameter(_) | TrajectoryError::BadGroundTruth(_) | TrajectoryError::TauOutOfRange(_) => {
                usage(err.to_string())
            }
            _ => domain(err),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(err: BenchError) -> Self {
        match err {
            BenchError::NoPackets | BenchError::NoRepeats => usage(err.to_string()),
            _ => domain(err),
        }
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn decode<T, E: std::fmt::Display>(path: &Path, parsed: Result<T, E>) -> CliResult<T> {
    parsed.map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Repr(a) => cmd_repr(&a),
        Command::Aplof(a) => cmd_aplof(&a, out),
        Command::Traj(a) => cmd_traj(&a, out),
        Command::Viz(a) => cmd_viz(&a),
        Command::Bench(a) => cmd_bench(&a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult {
    out.write_all(text.as_bytes()).map_err(|e| usage(format!("stdout: {e}")))
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> CliResult {
    let text = fs::read_to_string(&args.scene).map_err(|e| usage(format!("{}: {e}", args.scene.display())))?;
    let scene = parse_scene(&text).map_err(|e| usage(format!("{}: {e}", args.scene.display())))?;
    let stream = emit_events(&scene, args.seed)?;

    if is_csv(&args.events) {
        let mut buf = Vec::new();
        stream.write_csv(&mut buf)?;
        write(&args.events, &buf)?;
    } else {
        write(&args.events, &stream.to_binary())?;
    }
    emit(out, &format!("{} events -> {}\n", stream.len(), args.events.display()))?;

    let gt = ground_truth(&scene);
    let dir = match &args.flow_dir {
        Some(d) => d.clone(),
        None => args.events.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    for (prefix, taus, velocity) in [("flow", &args.flows, false), ("velocity", &args.velocities, true)] {
        for &tau in taus {
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(usage(format!("flow time {tau} must be a non-negative number of seconds")));
            }
            let field = if velocity { gt.velocity_at(tau) } else { gt.flow_at(tau) };
            let path = dir.join(format!("{prefix}_{tau}.flw"));
            write(&path, &field.to_bytes())?;
            emit(out, &format!("{prefix} at {tau} s -> {}\n", path.display()))?;
        }
    }
    if let Some(path) = &args.trajectory {
        let field = gt.bezier_field(args.degree, args.samples)?;
        write(path, &field.to_bytes())?;
        emit(out, &format!("trajectory (degree {}) -> {}\n", args.degree, path.display()))?;
    }
    Ok(())
}

fn load_events(path: &Path, width: Option<usize>, height: Option<usize>) -> CliResult<EventStream> {
    let bytes = read(path)?;
    if is_csv(path) {
        let (Some(w), Some(h)) = (width, height) else {
            return Err(usage("CSV input needs --width and --height"));
        };
        let geometry = SensorGeometry::new(w, h)?;
        decode(path, EventStream::parse_csv(bytes.as_slice(), geometry))
    } else {
        decode(path, EventStream::from_binary(&bytes))
    }
}

/// Checks the kind/flag pairing and returns the builder.
pub fn representation_for(args: &ReprArgs, window: WindowSpec) -> CliResult<Representation> {
    let uses_bins = matches!(args.kind, Kind::Labits | Kind::Voxel);
    if args.bins.is_some() && !uses_bins {
        return Err(usage("--bins only applies to labits and voxel"));
    }
    if args.depth.is_some() && args.kind != Kind::Tore {
        return Err(usage("--depth only applies to tore"));
    }
    if args.future != FutureArg::Earliest && args.kind != Kind::Labits {
        return Err(usage("--future only applies to labits"));
    }
    let bins = || args.bins.ok_or_else(|| usage("--bins is required for this kind"));
    Ok(match args.kind {
        Kind::Labits => {
            let future = match args.future {
                FutureArg::Earliest => FutureSelection::Earliest,
                FutureArg::Latest => FutureSelection::Latest,
            };
            Representation::Labits(LabitsConfig::new(bins()?).with_window(window).with_future(future))
        }
        Kind::Voxel => Representation::Voxel(VoxelConfig::new(bins()?).with_window(window)),
        Kind::Tore => {
            let depth = args.depth.ok_or_else(|| usage("--depth is required for tore"))?;
            Representation::Tore(ToreConfig::new(depth).with_window(window))
        }
        Kind::Ts => Representation::TimeSurface(window),
        Kind::Frame => Representation::EventFrame,
        Kind::Count => Representation::EventCount,
    })
}

pub fn cmd_repr(args: &ReprArgs) -> CliResult {
    let window = match (args.t0, args.t1) {
        (Some(t0), Some(t1)) => WindowSpec::Explicit(TimeWindow::new(t0, t1)?),
        _ => WindowSpec::Natural,
    };
    let rep = representation_for(args, window)?;
    let mut stream = load_events(&args.events, args.width, args.height)?;
    if let (Representation::EventFrame | Representation::EventCount, WindowSpec::Explicit(w)) = (&rep, window) {
        stream = stream.slice(&w, true);
    }
    let threading = if args.parallel { Threading::Parallel } else { Threading::Single };
    let tensor = rep.build(&stream, threading)?;
    write(&args.output, &tensor.to_bytes())
}

fn load_flow(path: &Path) -> CliResult<FlowField> {
    decode(path, FlowField::from_bytes(&read(path)?))
}

pub fn cmd_aplof(args: &AplofArgs, out: &mut dyn Write) -> CliResult {
    let tensor = decode(&args.labits, DenseTensor::from_bytes(&read(&args.labits)?))?;
    if args.layer >= tensor.channels() {
        return Err(usage(format!(
            "layer {} out of range (tensor has {} channels)",
            args.layer,
            tensor.channels()
        )));
    }
    let config = PlaneFitConfig {
        beta: args.beta,
        patch: args.patch,
        min_support: args.min_support,
    };
    let layer = tensor.layer(args.layer);
    let flow = aplof_from_labits(&layer, args.tau_range, &config)?;
    write(&args.output, &flow.to_bytes())?;
    if !args.gt.is_empty() {
        let gt = match args.gt.as_slice() {
            [velocity] => load_flow(velocity)?,
            [minus, plus, at] => {
                let mask = apm_high(&layer, args.beta)?;
                // scattered ground truth is in pixels per 20 ms
                aplof_ground_truth(&load_flow(minus)?, &load_flow(plus)?, &load_flow(at)?, &mask)?.scaled(50.0)
            }
            other => return Err(usage(format!("--gt takes 1 or 3 flow files, got {}", other.len()))),
        };
        let (l1, n) = mean_l1(&flow, &gt)?;
        if n == 0 {
            return Err(domain(AplofError::NoValidPixels));
        }
        let line = if args.json_lines {
            format!("{}\n", json!({"mean_l1": l1, "pixels": n}))
        } else {
            format!("mean_l1 {l1:.4} over {n} pixels\n")
        };
        emit(out, &line)?;
    } else if !args.json_lines {
        emit(out, &format!("{} valid pixels\n", flow.valid_count()))?;
    }
    Ok(())
}

pub fn cmd_traj(args: &TrajArgs, out: &mut dyn Write) -> CliResult {
    if args.gt.len() != args.times.len() {
        return Err(usage(format!("{} flow files but {} times", args.gt.len(), args.times.len())));
    }
    let pred = decode(&args.pred, BezierTrajectoryField::from_bytes(&read(&args.pred)?))?;
    let flows = args.gt.iter().map(|p| load_flow(p)).collect::<CliResult<Vec<_>>>()?;
    let gt = TrajectoryGroundTruth::new(args.times.clone(), flows)?;
    let traj = trajectory_metrics(&pred, &gt)?;
    let last = gt.len() - 1;
    let final_view = two_view_metrics(&bezier_eval(&pred, gt.times()[last])?, &gt.flows()[last])?;
    let text = if args.json_lines {
        format!(
            "{}\n",
            json!({"tepe": traj.epe, "tae": traj.ae, "epe": final_view.epe, "ae": final_view.ae})
        )
    } else {
        format!(
            "TEPE {:.4}\nTAE {:.4}\nEPE {:.4}\nAE {:.4}\n",
            traj.epe, traj.ae, final_view.epe, final_view.ae
        )
    };
    emit(out, &text)
}

pub fn cmd_viz(args: &VizArgs) -> CliResult {
    let tensor = decode(&args.tensor, DenseTensor::from_bytes(&read(&args.tensor)?))?;
    let colormap = match args.colormap {
        ColormapArg::Gray => Colormap::Gray,
        ColormapArg::Viridis => Colormap::Viridis,
    };
    let range = match args.range {
        RangeArg::Fixed => ValueRange::Fixed,
        RangeArg::Minmax => ValueRange::MinMax,
    };
    let image = render_layer(&tensor, args.layer, colormap, range).map_err(|e| usage(e.to_string()))?;
    write(&args.output, &image.to_pnm())
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> CliResult {
    let config = BenchConfig {
        packet_count: args.packets,
        packet_duration: args.packet_duration,
        sensor_width: args.width,
        sensor_height: args.height,
        repeats: args.repeats,
        warmup: args.warmup,
        labits_bins: args.labits_bins,
        voxel_bins: args.voxel_bins,
        tore_depth: args.tore_depth,
        parallel: args.parallel,
    };
    let packets = synth_packets(&config, args.seed)?;
    let report = run_bench(&packets, &config)?;
    if args.json_lines {
        emit(out, &report.to_json_lines())
    } else {
        emit(out, &report.to_table())
    }
}
