#![allow(dead_code)]

use labits::event::{Event, EventStream, Polarity, SensorGeometry, TimeWindow};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Random sorted stream. Timestamps are drawn from a span that is sometimes
/// tiny so ties and probe-boundary hits are common.
pub fn random_stream(rng: &mut SplitMix64, max_dim: usize, max_events: usize) -> EventStream {
    let w = rng.random_range(1..=max_dim);
    let h = rng.random_range(1..=max_dim);
    let geometry = SensorGeometry::new(w, h).unwrap();
    let n = rng.random_range(0..=max_events);
    let t0 = rng.random_range(0..1_000_000u64);
    let span = match rng.random_range(0..3) {
        0 => rng.random_range(1..50u64),
        1 => rng.random_range(50..5_000u64),
        _ => rng.random_range(5_000..200_000u64),
    };
    let mut times: Vec<u64> = (0..n).map(|_| t0 + rng.random_range(0..=span)).collect();
    times.sort_unstable();
    let events = times
        .into_iter()
        .map(|t| {
            let p = if rng.random_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
            Event::new(t, rng.random_range(0..w) as u16, rng.random_range(0..h) as u16, p)
        })
        .collect();
    EventStream::new(geometry, events).unwrap()
}

/// Natural window when the stream has one, otherwise (or at random) an
/// explicit window around the stream.
pub fn random_window(rng: &mut SplitMix64, stream: &EventStream) -> TimeWindow {
    let natural = stream.natural_window().ok();
    match (natural, rng.random_range(0..3)) {
        (Some(w), 0) => w,
        (Some(w), 1) => {
            let lo = w.start().saturating_sub(rng.random_range(0..w.duration()));
            let hi = w.end() - rng.random_range(0..w.duration());
            TimeWindow::new(lo, hi.max(lo + 1)).unwrap()
        }
        _ => {
            let base = stream.events().first().map_or(0, |e| e.t);
            let start = base.saturating_sub(rng.random_range(0..1000));
            TimeWindow::new(start, start + rng.random_range(1..100_000)).unwrap()
        }
    }
}

/// Literal per-probe scan over every event, written without the builder's
/// binary search or write ordering.
pub fn labits_oracle(stream: &EventStream, window: &TimeWindow, bins: usize) -> Vec<f64> {
    let g = stream.geometry();
    let (w, h) = (g.width(), g.height());
    let range = window.duration() as f64 / (bins + 1) as f64;
    let mut out = vec![-1.0; bins * w * h];
    for i in 1..=bins {
        let tau = window.start() as f64 + i as f64 * range;
        let mut past: Vec<Option<f64>> = vec![None; w * h];
        let mut future: Vec<Option<f64>> = vec![None; w * h];
        for e in stream.events() {
            let t = e.t as f64;
            let p = e.y as usize * w + e.x as usize;
            if t >= tau - range && t <= tau {
                if past[p].is_none_or(|best| t >= best) {
                    past[p] = Some(t);
                }
            } else if t > tau && t <= tau + range && future[p].is_none_or(|best| t < best) {
                future[p] = Some(t);
            }
        }
        for p in 0..w * h {
            if let Some(t) = past[p].or(future[p]) {
                out[(i - 1) * w * h + p] = ((t - tau) / range).clamp(-1.0, 1.0);
            }
        }
    }
    out
}

/// Merges `count` events at `(x, y)` spread over `window` into the stream.
pub fn with_hot_pixel(stream: &EventStream, rng: &mut SplitMix64, x: u16, y: u16, count: usize, window: &TimeWindow) -> EventStream {
    let mut events = stream.events().to_vec();
    events.extend((0..count).map(|_| Event::new(rng.random_range(window.start()..=window.end()), x, y, Polarity::Positive)));
    EventStream::sorted(stream.geometry(), events).unwrap()
}
