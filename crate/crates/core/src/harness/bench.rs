//! Wall-clock latency measurement. Numbers are machine-dependent and
//! informational only.

use std::time::Instant;

use crate::alert::{run_stream_with, AlertConfig, AlertEngine, ReadoutSchedule};
use crate::error::{Error, Result};
use crate::events::Event;
use crate::model::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub events: usize,
    pub readouts: usize,
    pub update_p50_ns: u64,
    pub update_p99_ns: u64,
    pub update_mean_ns: f64,
    /// Snapshot plus classification.
    pub tp_p50_us: f64,
    pub tp_mean_us: f64,
    /// Mean input accumulation time over complete readout intervals.
    pub t_in_mean_us: f64,
}

/// Nearest-rank percentile of a sorted slice.
pub fn percentile(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Stream-time lengths of each readout interval, last partial one excluded
/// for time-based schedules.
pub fn accumulation_times(first_t: u64, times: &[u64], schedule: ReadoutSchedule) -> Vec<u64> {
    let mut out = Vec::with_capacity(times.len());
    let mut prev = first_t;
    for &t in times {
        let complete = match schedule {
            ReadoutSchedule::EveryMicros(dt) => (t - first_t).is_multiple_of(dt),
            _ => true,
        };
        if complete {
            out.push(t - prev);
        }
        prev = t;
    }
    out
}

pub fn bench(model: &Model, cfg: &AlertConfig, events: &[Event], schedule: ReadoutSchedule, warmup: usize) -> Result<BenchReport> {
    let first = events
        .first()
        .ok_or_else(|| Error::Precondition("cannot bench an empty stream".into()))?;
    let mut engine = AlertEngine::new(&model.embedder, cfg.clone())?;
    for e in events.iter().take(warmup) {
        engine.push(e)?;
    }

    let mut engine = AlertEngine::new(&model.embedder, cfg.clone())?;
    let mut lat = Vec::with_capacity(events.len());
    for e in events {
        let start = Instant::now();
        engine.push(e)?;
        lat.push(start.elapsed().as_nanos() as u64);
    }
    lat.sort_unstable();

    let mut engine = AlertEngine::new(&model.embedder, cfg.clone())?;
    let mut tp = Vec::new();
    let mut times = Vec::new();
    run_stream_with(&mut engine, events.iter().copied(), schedule, |eng, snap| {
        let start = Instant::now();
        let s = eng.snapshot();
        model.head.classify(&s)?;
        tp.push(start.elapsed().as_nanos() as u64);
        times.push(snap.time_us.unwrap_or(first.t));
        Ok(())
    })?;
    tp.sort_unstable();
    let t_in = accumulation_times(first.t, &times, schedule);
    let mean = |v: &[u64]| if v.is_empty() { 0.0 } else { v.iter().sum::<u64>() as f64 / v.len() as f64 };
    Ok(BenchReport {
        events: events.len(),
        readouts: tp.len(),
        update_p50_ns: percentile(&lat, 0.5),
        update_p99_ns: percentile(&lat, 0.99),
        update_mean_ns: mean(&lat),
        tp_p50_us: percentile(&tp, 0.5) as f64 / 1e3,
        tp_mean_us: mean(&tp) / 1e3,
        t_in_mean_us: mean(&t_in),
    })
}
