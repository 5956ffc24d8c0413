//! Deterministic synthetic streams: Gaussian blobs drifting across the
//! sensor in a class-dependent direction, plus uniform background noise.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Event, EventStream};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub sensor_width: u16,
    pub sensor_height: u16,
    /// Events per second; timestamps follow a fixed-rate scheduler.
    pub rate_hz: u64,
    pub duration_us: u64,
    pub blobs: usize,
    pub class_id: usize,
    pub num_classes: usize,
    pub blob_sigma: f64,
    pub speed_px_per_s: f64,
    /// Fraction of events drawn uniformly over the sensor.
    pub noise: f64,
    pub start_us: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            sensor_width: 128,
            sensor_height: 128,
            rate_hz: 62_000,
            duration_us: 1_000_000,
            blobs: 3,
            class_id: 0,
            num_classes: 2,
            blob_sigma: 5.0,
            speed_px_per_s: 60.0,
            noise: 0.05,
            start_us: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.duration_us == 0 {
            return Err(Error::Config("synthetic duration must be > 0".into()));
        }
        if self.rate_hz == 0 {
            return Err(Error::Config("synthetic rate must be > 0".into()));
        }
        if self.sensor_width == 0 || self.sensor_height == 0 {
            return Err(Error::Config("sensor dimensions must be > 0".into()));
        }
        if self.blobs == 0 {
            return Err(Error::Config("at least one blob is required".into()));
        }
        if self.num_classes == 0 || self.class_id >= self.num_classes {
            return Err(Error::Config(format!(
                "class id {} out of range for {} classes",
                self.class_id, self.num_classes
            )));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config("noise fraction must be in [0, 1]".into()));
        }
        if !(self.blob_sigma > 0.0) {
            return Err(Error::Config("blob sigma must be > 0".into()));
        }
        Ok(())
    }

    /// Number of events the scheduler emits: `rate * duration`, floored.
    pub fn event_count(&self) -> u64 {
        (self.rate_hz as u128 * self.duration_us as u128 / 1_000_000) as u64
    }
}

#[derive(Debug, Clone)]
struct Blob {
    x0: f64,
    y0: f64,
}

/// Lazily generated synthetic stream; yields events in timestamp order.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    cfg: SyntheticConfig,
    rng: ChaCha8Rng,
    blobs: Vec<Blob>,
    vx: f64,
    vy: f64,
    jitter: Normal<f64>,
    index: u64,
    count: u64,
}

impl SyntheticSource {
    pub fn new(cfg: SyntheticConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = cfg.sensor_width as f64;
        let h = cfg.sensor_height as f64;
        let blobs = (0..cfg.blobs)
            .map(|_| Blob {
                x0: rng.random_range(0.0..w),
                y0: rng.random_range(0.0..h),
            })
            .collect();
        let angle = TAU * cfg.class_id as f64 / cfg.num_classes as f64;
        let (vx, vy) = (cfg.speed_px_per_s * angle.cos(), cfg.speed_px_per_s * angle.sin());
        let jitter = Normal::new(0.0, cfg.blob_sigma).expect("sigma validated");
        let count = cfg.event_count();
        Ok(SyntheticSource {
            cfg,
            rng,
            blobs,
            vx,
            vy,
            jitter,
            index: 0,
            count,
        })
    }

    pub fn sensor(&self) -> (u16, u16) {
        (self.cfg.sensor_width, self.cfg.sensor_height)
    }

    pub fn total(&self) -> u64 {
        self.count
    }
}

/// Triangle-wave reflection of `v` into `[0, len)`.
fn reflect(v: f64, len: f64) -> f64 {
    let period = 2.0 * len;
    let m = v.rem_euclid(period);
    if m < len {
        m
    } else {
        period - m
    }
}

fn to_pixel(v: f64, len: u16) -> u16 {
    (v.floor().max(0.0) as u64).min(len as u64 - 1) as u16
}

impl Iterator for SyntheticSource {
    type Item = Event;

    fn next(&mut self) -> Option<Event> {
        if self.index >= self.count {
            return None;
        }
        let i = self.index;
        self.index += 1;
        let offset = (i as u128 * 1_000_000 / self.cfg.rate_hz as u128) as u64;
        let t = self.cfg.start_us + offset;
        let (w, h) = (self.cfg.sensor_width, self.cfg.sensor_height);
        let (x, y) = if self.rng.random_bool(self.cfg.noise) {
            (self.rng.random_range(0..w), self.rng.random_range(0..h))
        } else {
            let b = &self.blobs[self.rng.random_range(0..self.blobs.len())];
            let ts = offset as f64 * 1e-6;
            let cx = reflect(b.x0 + self.vx * ts, w as f64);
            let cy = reflect(b.y0 + self.vy * ts, h as f64);
            let px = cx + self.jitter.sample(&mut self.rng);
            let py = cy + self.jitter.sample(&mut self.rng);
            (to_pixel(px, w), to_pixel(py, h))
        };
        let p = if self.rng.random_bool(0.5) { 1 } else { -1 };
        Some(Event { t, x, y, p })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.index) as usize;
        (left, Some(left))
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<EventStream> {
    let source = SyntheticSource::new(cfg.clone(), seed)?;
    let events: Vec<Event> = source.collect();
    EventStream::new(cfg.sensor_width, cfg.sensor_height, events)
}
