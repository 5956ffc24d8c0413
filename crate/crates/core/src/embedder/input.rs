//! Per-event MLP input layouts: shifted scalar time or sinusoidal time pair.

use std::fmt;

use super::time::{encode_time, TimeEncodingConfig};
use crate::grid::NormalizedEvent;
use crate::registry::Registry;

/// Builds the MLP input vector for one normalized event.
pub trait InputEncoding: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn input_dim(&self) -> usize;

    /// Whether the encoding is independent of the sample's time origin,
    /// which incremental updates require.
    fn time_encoded(&self) -> bool;

    /// `origin` is the first timestamp of the current sample.
    fn encode(&self, ev: &NormalizedEvent, origin: u64, out: &mut Vec<f32>);

    fn flops_per_event(&self) -> u64;
}

/// `(t - t_first [s], x, y, p)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShiftedTime;

impl InputEncoding for ShiftedTime {
    fn name(&self) -> &'static str {
        "lert"
    }

    fn input_dim(&self) -> usize {
        4
    }

    fn time_encoded(&self) -> bool {
        false
    }

    fn encode(&self, ev: &NormalizedEvent, origin: u64, out: &mut Vec<f32>) {
        out.clear();
        let shifted = ev.t.saturating_sub(origin) as f64 * 1e-6;
        out.extend_from_slice(&[shifted as f32, ev.xn, ev.yn, ev.p as f32]);
    }

    fn flops_per_event(&self) -> u64 {
        // integer subtraction is free, one scale to seconds
        1
    }
}

/// `(t_x, t_y, x, y, p)` with `(t_x, t_y)` on a circle of radius alpha.
#[derive(Debug, Clone, Copy)]
pub struct SinusoidalTime {
    pub cfg: TimeEncodingConfig,
}

impl InputEncoding for SinusoidalTime {
    fn name(&self) -> &'static str {
        "telert"
    }

    fn input_dim(&self) -> usize {
        5
    }

    fn time_encoded(&self) -> bool {
        true
    }

    fn encode(&self, ev: &NormalizedEvent, _origin: u64, out: &mut Vec<f32>) {
        out.clear();
        let (tx, ty) = encode_time(&self.cfg, ev.t);
        out.extend_from_slice(&[tx as f32, ty as f32, ev.xn, ev.yn, ev.p as f32]);
    }

    fn flops_per_event(&self) -> u64 {
        // phase: mul + add; cos, sin; two amplitude muls
        6
    }
}

pub fn input_registry() -> Registry<dyn InputEncoding, TimeEncodingConfig> {
    let mut reg: Registry<dyn InputEncoding, TimeEncodingConfig> = Registry::new("input encoding");
    reg.register("lert", |_| Box::new(ShiftedTime));
    reg.register("telert", |cfg| Box::new(SinusoidalTime { cfg: *cfg }));
    reg
}

/// Registry name selected by the `te.enabled` flag.
pub fn encoding_name(te: &TimeEncodingConfig) -> &'static str {
    if te.enabled {
        "telert"
    } else {
        "lert"
    }
}
