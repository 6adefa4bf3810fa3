//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the verdict lines always
//! reach the terminal; exits non-zero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use labits::aplof::{
    aplof_from_labits, aplof_ground_truth, aplof_loss, apm_high, apm_low, backward_difference, central_difference,
    ActivePixelMask, AplofPair, PlaneFitConfig, Resolution,
};
use labits::bench::{checksum, run_bench, synth_packets, BenchConfig};
use labits::event::{Event, EventStream, Polarity, SensorGeometry, TimeWindow};
use labits::flow::FlowField;
use labits::repr::{
    build_event_frame, build_labits, build_time_surface, build_tore, build_voxel_grid, LabitsConfig, LabitsProbes,
    Representation, Threading, ToreConfig, VoxelConfig, WindowSpec,
};
use labits::synth::{emit_events, ground_truth, SyntheticScene};
use labits::tensor::DenseTensor;
use labits::trajectory::{
    angular_error, bezier_eval, fit_bezier, trajectory_loss, trajectory_metrics, BezierTrajectoryField,
    TrajectoryGroundTruth,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("labits exactness", labits_exactness),
        ("representation identities", representation_identities),
        ("value range and hot-pixel isolation", range_and_isolation),
        ("analytic local flow accuracy", local_flow_accuracy),
        ("finite-difference convergence order", convergence_order),
        ("active pixel mask arithmetic", mask_arithmetic),
        ("bezier fit and flow metrics", bezier_and_metrics),
        ("loss formulas", loss_formulas),
        ("benchmark protocol", benchmark_protocol),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn stream(geometry: (usize, usize), events: &[(u64, u16, u16, i64)]) -> EventStream {
    let g = SensorGeometry::new(geometry.0, geometry.1).unwrap();
    let ev = events
        .iter()
        .map(|&(t, x, y, p)| Event::new(t, x, y, Polarity::from_raw(p).unwrap()))
        .collect();
    EventStream::new(g, ev).unwrap()
}

fn labits_exactness() -> Outcome {
    let start = Instant::now();
    let single = stream((16, 16), &[(250, 5, 5, 1)]);
    let cfg = LabitsConfig::new(3).with_window(TimeWindow::new(0, 800).unwrap());
    let column = build_labits(&single, &cfg).unwrap().column(5, 5);
    ensure!(
        column.iter().map(|v| v.to_bits()).eq([0.25f32, -0.75, -1.0].iter().map(|v| v.to_bits())),
        "single-event column {column:?}"
    );
    let pair = stream((16, 16), &[(100, 5, 5, 1), (900, 5, 5, 1)]);
    let column = build_labits(&pair, &LabitsConfig::new(3)).unwrap().column(5, 5);
    ensure!(
        column.iter().map(|v| v.to_bits()).eq([-1.0f32, -1.0, 1.0].iter().map(|v| v.to_bits())),
        "natural-window column {column:?}"
    );

    let mut rng = common::rng(0xACCE_0001);
    let mut worst = 0.0f64;
    let mut total_events = 0;
    for case in 0..200 {
        let s = common::random_stream(&mut rng, 64, 5000);
        let window = common::random_window(&mut rng, &s);
        let bins = rng.random_range(1..=16);
        let built = build_labits(&s, &LabitsConfig::new(bins).with_window(window)).unwrap();
        let oracle = common::labits_oracle(&s, &window, bins);
        for (k, (&a, &b)) in built.as_slice().iter().zip(&oracle).enumerate() {
            let d = (a as f64 - b).abs();
            ensure!(d <= 1e-6, "case {case}: entry {k} builder {a} oracle {b}");
            worst = worst.max(d);
        }
        total_events += s.len();
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "hand traces bit-exact; 200 random streams ({total_events} events) max |diff| {worst:.1e}"
    ))
}

fn representation_identities() -> Outcome {
    let mut rng = common::rng(0xACCE_0002);
    for case in 0..50 {
        let s = common::random_stream(&mut rng, 48, 3000);
        let window = common::random_window(&mut rng, &s);
        let tore = build_tore(&s, &ToreConfig::new(1).with_window(window)).unwrap();
        let ts = build_time_surface(&s, &WindowSpec::Explicit(window)).unwrap();
        ensure!(tore.bit_eq(&ts), "case {case}: TORE(K=1) differs from the time surface");
    }

    let mut worst = 0.0f32;
    for case in 0..50 {
        let s = common::random_stream(&mut rng, 48, 3000);
        let (Some(first), Some(last)) = (s.events().first(), s.events().last()) else {
            continue;
        };
        // strictly enclosing window keeps every normalized time interior
        if first.t == 0 {
            continue;
        }
        let window = TimeWindow::new(first.t.saturating_sub(7), last.t + 11).unwrap();
        let bins = rng.random_range(2..=17);
        let voxel = build_voxel_grid(&s, &VoxelConfig::new(bins).with_window(window)).unwrap();
        let frame = build_event_frame(&s);
        for (p, &expected) in frame.as_slice().iter().enumerate() {
            let sum: f32 = (0..bins).map(|b| voxel.plane(b)[p]).sum();
            let d = (sum - expected).abs();
            ensure!(d <= 1e-5, "case {case}: pixel {p} bin sum {sum} vs polarity sum {expected}");
            worst = worst.max(d);
        }
    }
    Ok(format!("TORE(K=1) == time surface on 50 streams; voxel mass max |diff| {worst:.1e}"))
}

fn range_and_isolation() -> Outcome {
    let mut rng = common::rng(0xACCE_0003);
    for case in 0..100 {
        let s = common::random_stream(&mut rng, 40, 2000);
        let window = common::random_window(&mut rng, &s);
        let g = s.geometry();
        let hx = rng.random_range(0..g.width()) as u16;
        let hy = rng.random_range(0..g.height()) as u16;
        let noisy = common::with_hot_pixel(&s, &mut rng, hx, hy, 10_000, &window);
        let cfg = LabitsConfig::new(rng.random_range(1..=16)).with_window(window);
        let clean = build_labits(&s, &cfg).unwrap();
        let dirty = build_labits(&noisy, &cfg).unwrap();
        for t in [&clean, &dirty] {
            ensure!(
                t.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)),
                "case {case}: value outside [-1, 1]"
            );
        }
        let hot = g.index(hx as usize, hy as usize);
        for c in 0..cfg.bins {
            for (p, (a, b)) in clean.plane(c).iter().zip(dirty.plane(c)).enumerate() {
                ensure!(p == hot || a.to_bits() == b.to_bits(), "case {case}: pixel {p} changed in layer {c}");
            }
        }
    }
    Ok("100 streams in range; 10^4 hot-pixel events never touch other pixels".into())
}

fn local_flow_accuracy() -> Outcome {
    let start = Instant::now();
    let g = SensorGeometry::new(64, 24).unwrap();
    let cfg = PlaneFitConfig::default();
    let half = cfg.patch / 2;
    let mut summary = Vec::new();
    for speed in [25.0, 50.0, 100.0, 200.0] {
        for dir in [1.0, -1.0] {
            // four probe intervals of 5 px each; the edge crosses 20 columns
            let duration = (20.0 / speed * 1e6) as u64;
            let window = TimeWindow::new(0, duration).unwrap();
            let x0 = if dir > 0.0 { 10.3 } else { 53.7 };
            let scene = SyntheticScene::moving_edge(g, window, x0, dir * speed, 0.0);
            let events = emit_events(&scene, 0).unwrap();
            let bins = 3;
            let labits = build_labits(&events, &LabitsConfig::new(bins).with_window(window)).unwrap();
            let tau_range = LabitsProbes::new(&window, bins).unwrap().range_seconds();
            let (mut good, mut total) = (0, 0);
            for layer in 0..bins {
                let l = labits.layer(layer);
                let mask = apm_high(&l, cfg.beta).unwrap();
                let flow = aplof_from_labits(&l, tau_range, &cfg).unwrap();
                for y in half..g.height() - half {
                    for x in half..g.width() - half {
                        if !mask.is_active(x, y) {
                            continue;
                        }
                        total += 1;
                        if let Some([u, v]) = flow.get(x, y) {
                            let est = u.hypot(v);
                            let angle = angular_distance(v.atan2(u), if dir > 0.0 { 0.0 } else { std::f64::consts::PI });
                            if (est - speed).abs() <= 0.05 * speed && angle <= 2.0 {
                                good += 1;
                            }
                        }
                    }
                }
            }
            ensure!(total > 0, "speed {speed} dir {dir}: no interior active pixels");
            let frac = good as f64 / total as f64;
            ensure!(frac >= 0.9, "speed {speed} dir {dir}: only {good}/{total} within tolerance");
            summary.push(format!("{}{speed}:{:.0}%", if dir > 0.0 { "+" } else { "-" }, frac * 100.0));
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(summary.join(" "))
}

/// Absolute angle between two headings, degrees.
fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d).to_degrees()
}

fn convergence_order() -> Outcome {
    let f = |t: f64| t * t * t - 0.5 * t * t + 2.0 * t;
    let df = |t: f64| 3.0 * t * t - t + 2.0;
    let t = 1.0;
    let steps = [0.1, 0.05, 0.025, 0.0125];
    let central: Vec<f64> = steps.iter().map(|&h| (central_difference(f, t, h) - df(t)).abs()).collect();
    let backward: Vec<f64> = steps.iter().map(|&h| (backward_difference(f, t, h) - df(t)).abs()).collect();
    let ratios = |e: &[f64]| e.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>();
    let (rc, rb) = (ratios(&central), ratios(&backward));
    ensure!(rc.iter().all(|r| (3.0..=5.0).contains(r)), "central ratios {rc:?}");
    ensure!(rb.iter().all(|r| (1.6..=2.6).contains(r)), "backward ratios {rb:?}");
    let fmt = |r: &[f64]| r.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join("/");
    Ok(format!("central {} backward {}", fmt(&rc), fmt(&rb)))
}

fn mask_arithmetic() -> Outcome {
    // 16x16 layer, four 8x8 blocks:
    //   top-left: exactly 8 active of 64 (0.125 -> active)
    //   top-right: 7 active (inactive)
    //   bottom-left: all active
    //   bottom-right: threshold edge cases, none active
    let mut layer = DenseTensor::filled(1, 16, 16, -1.0);
    let mut expected = vec![false; 256];
    let mut put = |x: usize, y: usize, v: f32, active: bool| {
        layer.set(0, y, x, v);
        expected[y * 16 + x] = active;
    };
    let active_values = [0.0, 0.29, -0.29, 0.1, -0.1, 0.299, -0.2999, 0.05];
    for (i, &v) in active_values.iter().enumerate() {
        put(i, i % 8, v, true);
    }
    for i in 0..7 {
        put(8 + i, 0, 0.0, true);
    }
    for y in 8..16 {
        for x in 0..8 {
            put(x, y, 0.125 * ((x + y) % 3) as f32 - 0.125, true);
        }
    }
    let inactive = [0.3, -0.3, 1.0, -1.0, 0.5, -0.75, 0.30001, -0.9];
    for (i, &v) in inactive.iter().enumerate() {
        put(8 + i, 8 + i, v, false);
    }

    let hr = apm_high(&layer, 0.3).unwrap();
    for y in 0..16 {
        for x in 0..16 {
            ensure!(
                hr.is_active(x, y) == expected[y * 16 + x],
                "hr mask at ({x}, {y}) value {}",
                layer.get(0, y, x)
            );
        }
    }
    let lr = apm_low(&hr, 0.125).unwrap();
    ensure!((lr.height(), lr.width()) == (2, 2), "low-res dims {}x{}", lr.height(), lr.width());
    let got = [lr.is_active(0, 0), lr.is_active(1, 0), lr.is_active(0, 1), lr.is_active(1, 1)];
    ensure!(got == [true, false, true, false], "low-res blocks {got:?}");

    let fill = DenseTensor::filled(1, 16, 16, -1.0);
    ensure!(apm_high(&fill, 1.0).unwrap().count() == 0, "fill must never be active");

    // partial edge blocks average over in-bounds pixels: 8x4 blocks need 4 of 32
    let mut bits = vec![false; 16 * 12];
    bits[8..12].fill(true); // block (1, 0): 4 active of 32
    for x in 8..11 {
        bits[8 * 12 + x] = true; // block (1, 1): 3 active of 32
    }
    let partial = ActivePixelMask::new(16, 12, Resolution::High, bits);
    let lr = apm_low(&partial, 0.125).unwrap();
    ensure!((lr.height(), lr.width()) == (2, 2), "partial low-res dims");
    let got = [lr.is_active(0, 0), lr.is_active(1, 0), lr.is_active(0, 1), lr.is_active(1, 1)];
    ensure!(got == [false, true, false, false], "partial blocks {got:?}");
    Ok(format!("{} high-res actives, block boundary 8/64 and 4/32 active", hr.count()))
}

fn bezier_and_metrics() -> Outcome {
    let mut rng = common::rng(0xACCE_0007);
    let (h, w, n) = (6, 8, 3);
    let mut truth = BezierTrajectoryField::zeros(h, w, n, 0, 100_000);
    for y in 0..h {
        for x in 0..w {
            for p in truth.control_points_mut(x, y) {
                *p = [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)];
            }
        }
    }
    let times: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let flows = times.iter().map(|&t| bezier_eval(&truth, t).unwrap()).collect();
    let gt = TrajectoryGroundTruth::new(times.clone(), flows).unwrap();
    let fit = fit_bezier(&gt, n, 0, 100_000).unwrap();
    let mut worst = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            for (a, b) in fit.control_points(x, y).iter().zip(truth.control_points(x, y)) {
                worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            }
        }
    }
    ensure!(worst <= 1e-6, "control points off by {worst:e}");
    let m = trajectory_metrics(&fit, &gt).unwrap();
    ensure!(m.epe < 1e-6 && m.ae < 1e-6, "fit TEPE {} TAE {}", m.epe, m.ae);

    let shifted = TrajectoryGroundTruth::new(
        times.clone(),
        gt.flows().iter().map(|f| f.offset(0.3, -0.4)).collect(),
    )
    .unwrap();
    let tepe = trajectory_metrics(&truth, &shifted).unwrap().epe;
    ensure!((tepe - 0.5).abs() <= 1e-9, "offset TEPE {tepe}");

    let ae = angular_error([0.0, 1.0], [1.0, 0.0]);
    ensure!((ae - 60.0).abs() <= 1e-4, "AE {ae}");
    Ok(format!("control points within {worst:.1e}; offset TEPE {tepe:.12}; AE {ae:.4} deg"))
}

fn loss_formulas() -> Outcome {
    // 2x2 field, gt displacement T * (2, 0), times {0.5, 1}
    let times = vec![0.5, 1.0];
    let gt = TrajectoryGroundTruth::new(
        times.clone(),
        times.iter().map(|&t| FlowField::uniform(2, 2, 2.0 * t, 0.0)).collect(),
    )
    .unwrap();
    let linear = |p: [f64; 2]| {
        let mut f = BezierTrajectoryField::zeros(2, 2, 1, 0, 1000);
        for y in 0..2 {
            for x in 0..2 {
                f.control_points_mut(x, y)[0] = p;
            }
        }
        f
    };
    // per-iterate sums over T: (0.5 + 1) = 1.5, (1 + 2) = 3, 0
    let iterates = [linear([3.0, 0.0]), linear([2.0, -2.0]), linear([2.0, 0.0])];
    let loss = trajectory_loss(&iterates, &gt, 0.8).unwrap();
    let expected = 0.5 * (0.64 * 1.5 + 0.8 * 3.0);
    ensure!((loss - expected).abs() <= 1e-9, "three-iterate loss {loss} vs {expected}");

    let single_t = TrajectoryGroundTruth::new(vec![1.0], vec![FlowField::uniform(2, 2, 2.0, 0.0)]).unwrap();
    let two = trajectory_loss(&[linear([3.0, 0.0]), linear([2.0, 0.0])], &single_t, 0.8).unwrap();
    ensure!((two - 0.8).abs() <= 1e-9, "two-iterate loss {two}");

    // HR 16x16 off by (1, 0) on its valid pixels; LR 2x2 with one of two valid
    // pixels off by (0.5, -0.25)
    let hr_gt = FlowField::from_fn(16, 16, |x, y| ((x + y) % 2 == 0).then_some([1.0, 2.0]));
    let hr_pred = hr_gt.offset(1.0, 0.0);
    let lr_gt = FlowField::from_fn(2, 2, |x, y| (y == 0).then_some([x as f64, 0.5]));
    let mut lr_pred = lr_gt.clone();
    lr_pred.set(1, 0, [1.5, 0.25]);
    let pred = AplofPair::new(hr_pred, lr_pred).unwrap();
    let gt_pair = AplofPair::new(hr_gt, lr_gt).unwrap();
    let la = aplof_loss(&pred, &gt_pair).unwrap();
    ensure!((la - 1.375).abs() <= 1e-9, "aplof loss {la}");

    let g = SensorGeometry::new(16, 16).unwrap();
    let scene = SyntheticScene::moving_edge(g, TimeWindow::new(0, 100_000).unwrap(), 2.0, 100.0, 0.0);
    let truth = ground_truth(&scene);
    let mask = ActivePixelMask::full(16, 16);
    let apl = aplof_ground_truth(&truth.flow_at(0.04), &truth.flow_at(0.06), &truth.flow_at(0.05), &mask).unwrap();
    ensure!(apl.valid_count() == 16, "ground-truth scatter kept {} pixels", apl.valid_count());
    for (_, _, uv) in apl.iter_valid() {
        ensure!((uv[0] - 2.0).abs() <= 1e-9 && uv[1] == 0.0, "ground-truth APLOF {uv:?}");
    }
    Ok(format!("trajectory loss {loss:.9}, two-iterate {two:.9}, APLOF loss {la:.9}"))
}

fn benchmark_protocol() -> Outcome {
    let start = Instant::now();
    let config = BenchConfig::default();
    let packets = synth_packets(&config, 2024).map_err(|e| e.to_string())?;
    let report = run_bench(&packets, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    ensure!(report.rows.len() == 6, "{} rows", report.rows.len());

    let mean = |name: &str| report.row(name, "single").unwrap().mean_s;
    // event_count does the same per-event work on a second plane, so the two
    // can swap places on a noisy machine; a 10% band absorbs that
    let frame = mean("event_frame");
    let (runner_up, runner_up_s) = report
        .rows
        .iter()
        .filter(|r| r.name != "event_frame")
        .map(|r| (r.name.as_str(), r.mean_s))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    ensure!(
        frame <= 1.10 * runner_up_s,
        "event_frame ({frame:.6}s) slower than {runner_up} ({runner_up_s:.6}s) beyond the 10% band"
    );
    let ratio = mean("labits") / mean("voxel");
    ensure!(ratio <= 2.5, "labits/voxel mean ratio {ratio:.3}");
    ensure!(mean("tore") >= 0.5 * mean("time_surface"), "tore faster than half the time surface");

    for rep in config.representations() {
        let standalone: Vec<DenseTensor> = packets.iter().map(|p| rep.build(p, Threading::Single).unwrap()).collect();
        let row = report.row(rep.name(), "single").unwrap();
        ensure!(checksum(&standalone) == row.checksum, "{} output differs under timing", rep.name());
    }

    let table = report.to_table();
    let json = report.to_json_lines();
    ensure!(table.lines().count() == 8, "table has {} lines", table.lines().count());
    for line in json.lines() {
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
        for key in ["name", "mean_s", "median_s", "p95_s", "events_per_s"] {
            ensure!(v.get(key).is_some(), "record lacks {key}: {line}");
        }
    }
    println!("{table}");
    Ok(format!(
        "{} packets / {} events in {:.1}s; event_frame/{runner_up} {:.2}; labits/voxel {ratio:.2}",
        report.packet_count,
        report.total_events,
        elapsed.as_secs_f64(),
        frame / runner_up_s
    ))
}

fn determinism() -> Outcome {
    let mut rng = common::rng(0xACCE_0010);
    let mut builds = 0;
    for _ in 0..10 {
        let s = common::random_stream(&mut rng, 64, 4000);
        let window = common::random_window(&mut rng, &s);
        let reps = [
            Representation::Labits(LabitsConfig::new(9).with_window(window)),
            Representation::Voxel(VoxelConfig::new(9).with_window(window)),
            Representation::Tore(ToreConfig::new(3).with_window(window)),
            Representation::TimeSurface(WindowSpec::Explicit(window)),
            Representation::EventFrame,
            Representation::EventCount,
        ];
        for rep in reps {
            let a = rep.build(&s, Threading::Single).unwrap();
            let b = rep.build(&s, Threading::Single).unwrap();
            let c = rep.build(&s, Threading::Parallel).unwrap();
            ensure!(a.bit_eq(&b) && a.bit_eq(&c), "{} differs across runs or threading", rep.name());
            builds += 3;
        }
    }

    let g = SensorGeometry::new(48, 32).unwrap();
    let window = TimeWindow::new(0, 100_000).unwrap();
    let scene = SyntheticScene::moving_edge(g, window, 3.5, 150.0, 0.0).with_hot_pixel(7, 9, 2000.0);
    let events = emit_events(&scene, 11).unwrap();
    ensure!(events == emit_events(&scene, 11).unwrap(), "synthetic emission not reproducible");
    let labits = build_labits(&events, &LabitsConfig::new(5).with_window(window)).unwrap();
    let tau_range = LabitsProbes::new(&window, 5).unwrap().range_seconds();
    let layer = labits.layer(2);
    let cfg = PlaneFitConfig::default();
    let f1 = aplof_from_labits(&layer, tau_range, &cfg).unwrap();
    let f2 = aplof_from_labits(&layer, tau_range, &cfg).unwrap();
    ensure!(f1.to_bytes() == f2.to_bytes() && f1 == f2, "estimator differs across runs");
    let hr = apm_high(&layer, 0.3).unwrap();
    ensure!(hr == apm_high(&layer, 0.3).unwrap(), "high-res mask differs");
    ensure!(apm_low(&hr, 0.125).unwrap() == apm_low(&hr, 0.125).unwrap(), "low-res mask differs");
    let truth = ground_truth(&scene);
    let gt1 = aplof_ground_truth(&truth.flow_at(0.03), &truth.flow_at(0.05), &truth.flow_at(0.04), &hr).unwrap();
    let gt2 = aplof_ground_truth(&truth.flow_at(0.03), &truth.flow_at(0.05), &truth.flow_at(0.04), &hr).unwrap();
    ensure!(gt1 == gt2, "ground-truth APLOF differs");
    let b1 = truth.bezier_field(4, 10).unwrap();
    let b2 = truth.bezier_field(4, 10).unwrap();
    ensure!(b1.to_bytes() == b2.to_bytes(), "bezier fit differs");
    let cfg = BenchConfig {
        packet_count: 3,
        ..BenchConfig::default()
    };
    ensure!(synth_packets(&cfg, 5).unwrap() == synth_packets(&cfg, 5).unwrap(), "bench packets differ");
    Ok(format!("{builds} builds bit-identical across runs and threading; estimators stable"))
}
