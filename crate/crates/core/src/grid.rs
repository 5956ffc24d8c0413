//! Spatial partition of the sensor plane into fixed patches, per-patch
//! activity accounting and patch-local coordinate normalization.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::events::Event;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    pub sensor_width: u16,
    pub sensor_height: u16,
    pub patch_w: u16,
    pub patch_h: u16,
    /// Minimum events per patch per sample for the patch to be active.
    pub activation_threshold: u32,
}

impl GridConfig {
    pub fn new(sensor_width: u16, sensor_height: u16, patch_w: u16, patch_h: u16, activation_threshold: u32) -> Result<Self> {
        let cfg = GridConfig {
            sensor_width,
            sensor_height,
            patch_w,
            patch_h,
            activation_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_w == 0 || self.patch_h == 0 {
            return Err(Error::Config("patch dimensions must be >= 1".into()));
        }
        if self.sensor_width == 0 || self.sensor_height == 0 {
            return Err(Error::Config("sensor dimensions must be >= 1".into()));
        }
        Ok(())
    }

    pub fn grid_w(&self) -> usize {
        (self.sensor_width as usize).div_ceil(self.patch_w as usize)
    }

    pub fn grid_h(&self) -> usize {
        (self.sensor_height as usize).div_ceil(self.patch_h as usize)
    }

    pub fn cells(&self) -> usize {
        self.grid_w() * self.grid_h()
    }

    pub fn patch_at(&self, flat: usize) -> PatchId {
        let gw = self.grid_w();
        PatchId {
            gx: (flat % gw) as u16,
            gy: (flat / gw) as u16,
        }
    }

    pub fn flat(&self, patch: PatchId) -> usize {
        patch.gy as usize * self.grid_w() + patch.gx as usize
    }

    /// Absolute threshold from an events-per-patch-pixel rate.
    pub fn threshold_from_rate(&self, rate: f64) -> u32 {
        let pixels = self.patch_w as f64 * self.patch_h as f64;
        (rate * pixels).ceil().max(0.0) as u32
    }
}

/// Grid coordinate of a patch. Ordering is row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PatchId {
    pub gx: u16,
    pub gy: u16,
}

impl PatchId {
    pub const fn new(gx: u16, gy: u16) -> Self {
        PatchId { gx, gy }
    }
}

impl Ord for PatchId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.gy, self.gx).cmp(&(other.gy, other.gx))
    }
}

impl PartialOrd for PatchId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.gx, self.gy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedEvent {
    pub t: u64,
    pub xn: f32,
    pub yn: f32,
    pub p: i8,
    pub patch: PatchId,
}

pub fn assign_patch(cfg: &GridConfig, e: &Event) -> Result<PatchId> {
    e.validate(cfg.sensor_width, cfg.sensor_height)?;
    Ok(PatchId {
        gx: e.x / cfg.patch_w,
        gy: e.y / cfg.patch_h,
    })
}

/// Maps a local offset in `0..len` onto `[-1, 1]`. A 1-pixel axis maps to 0.
fn scale_axis(local: u16, len: u16) -> f32 {
    if len <= 1 {
        return 0.0;
    }
    2.0 * local as f32 / (len - 1) as f32 - 1.0
}

pub fn normalize(cfg: &GridConfig, e: &Event) -> Result<NormalizedEvent> {
    let patch = assign_patch(cfg, e)?;
    let lx = e.x - patch.gx * cfg.patch_w;
    let ly = e.y - patch.gy * cfg.patch_h;
    Ok(NormalizedEvent {
        t: e.t,
        xn: scale_axis(lx, cfg.patch_w),
        yn: scale_axis(ly, cfg.patch_h),
        p: e.p,
        patch,
    })
}

/// Events of one sample grouped by patch, in input order within each patch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partition {
    pub patches: BTreeMap<PatchId, Vec<NormalizedEvent>>,
}

impl Partition {
    pub fn count(&self, patch: &PatchId) -> usize {
        self.patches.get(patch).map_or(0, Vec::len)
    }

    pub fn counts(&self) -> impl Iterator<Item = (PatchId, usize)> + '_ {
        self.patches.iter().map(|(p, v)| (*p, v.len()))
    }

    pub fn total_events(&self) -> usize {
        self.patches.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

pub fn partition_sample(cfg: &GridConfig, events: &[Event]) -> Result<Partition> {
    let mut part = Partition::default();
    for e in events {
        let ne = normalize(cfg, e)?;
        part.patches.entry(ne.patch).or_default().push(ne);
    }
    Ok(part)
}

/// Keeps patches whose count reaches the activation threshold.
pub fn filter_active(cfg: &GridConfig, partition: Partition) -> Partition {
    let threshold = cfg.activation_threshold as usize;
    Partition {
        patches: partition
            .patches
            .into_iter()
            .filter(|(_, evs)| evs.len() >= threshold)
            .collect(),
    }
}
