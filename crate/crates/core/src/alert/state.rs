use std::mem::size_of;

use crate::archive::{Tensor, WeightArchive};
use crate::error::Result;
use crate::grid::GridConfig;

/// Per-patch token memory. Holds no raw events; its size depends only on
/// the grid and the token width.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenState {
    cells: usize,
    channels: usize,
    pub(crate) values: Vec<f64>,
    pub(crate) last_win: Vec<u64>,
    pub(crate) misses: Vec<u32>,
    pub(crate) counts: Vec<u32>,
    pub(crate) touched: Vec<bool>,
    pub(crate) global_step: u64,
}

impl TokenState {
    pub fn new(cells: usize, channels: usize) -> Self {
        let n = cells * channels;
        TokenState {
            cells,
            channels,
            values: vec![0.0; n],
            last_win: vec![0; n],
            misses: vec![0; n],
            counts: vec![0; cells],
            touched: vec![false; cells],
            global_step: 0,
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn event_count(&self, patch: usize) -> u32 {
        self.counts[patch]
    }

    /// Whether the patch has absorbed any event since initialization.
    pub fn is_touched(&self, patch: usize) -> bool {
        self.touched[patch]
    }

    pub fn stored(&self, patch: usize, channel: usize) -> f64 {
        self.values[patch * self.channels + channel]
    }

    pub fn last_win(&self, patch: usize, channel: usize) -> u64 {
        self.last_win[patch * self.channels + channel]
    }

    #[inline]
    pub(crate) fn range(&self, patch: usize) -> std::ops::Range<usize> {
        patch * self.channels..(patch + 1) * self.channels
    }

    /// Heap bytes held by the state.
    pub fn footprint_bytes(&self) -> usize {
        self.values.capacity() * size_of::<f64>()
            + self.last_win.capacity() * size_of::<u64>()
            + self.misses.capacity() * size_of::<u32>()
            + self.counts.capacity() * size_of::<u32>()
            + self.touched.capacity() * size_of::<bool>()
    }

    /// Debug dump as `state.values`, `state.last_win` and `state.counts`.
    pub fn dump(&self) -> Result<WeightArchive> {
        let mut a = WeightArchive::new();
        let (r, c) = (self.cells, self.channels);
        a.insert("state.values", Tensor::matrix(r, c, self.values.iter().map(|&v| v as f32).collect())?);
        a.insert("state.last_win", Tensor::matrix(r, c, self.last_win.iter().map(|&v| v as f32).collect())?);
        a.insert("state.counts", Tensor::vector(self.counts.iter().map(|&v| v as f32).collect()));
        Ok(a)
    }
}

/// Zeroed state for `grid` with token width `channels`.
pub fn init_state(grid: &GridConfig, channels: usize) -> TokenState {
    TokenState::new(grid.cells(), channels)
}
