//! Asynchronous token maintenance: per-event max updates with old-maximum
//! decay, activity counters and on-demand snapshot readout.

mod rules;
mod state;

pub use rules::{rule_registry, DecayParams, EagerGlobalStep, LazyGlobalStep, PerTokenUpdate, UpdateRule};
pub use state::{init_state, TokenState};

use crate::archive::{Tensor, WeightArchive};
use crate::embedder::{Embedder, PatchToken};
use crate::error::{Error, Result};
use crate::events::Event;
use crate::grid::{normalize, NormalizedEvent};

#[derive(Debug, Clone, PartialEq)]
pub struct AlertConfig {
    pub lambda: f64,
    pub n_threshold: u64,
    /// Events per update batch.
    pub k: usize,
    pub activation_threshold: u32,
    /// Name of the [`UpdateRule`] in [`rule_registry`].
    pub counter_mode: String,
}

impl Default for AlertConfig {
    fn default() -> Self {
        AlertConfig {
            lambda: 0.0,
            n_threshold: 0,
            k: 1,
            activation_threshold: 0,
            counter_mode: "global_step".into(),
        }
    }
}

impl AlertConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("alert.lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.k == 0 {
            return Err(Error::Config("alert.k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn decay(&self) -> DecayParams {
        DecayParams {
            lambda: self.lambda,
            n_threshold: self.n_threshold,
        }
    }
}

/// Active tokens read out at one step boundary, positional embeddings applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    /// Readout time in microseconds, when the schedule is time-based.
    pub time_us: Option<u64>,
    pub tokens: Vec<PatchToken>,
}

impl Snapshot {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Appends `{prefix}.values` `[P, c]`, `{prefix}.patches` `[P]` (flat
    /// indices) and `{prefix}.step` `[4]` (16-bit limbs, least significant
    /// first, so the count survives f32 storage exactly).
    pub fn write_to(&self, archive: &mut WeightArchive, prefix: &str, grid_w: usize, channels: usize) -> Result<()> {
        let values: Vec<f32> = self.tokens.iter().flat_map(|t| t.values.iter().copied()).collect();
        let patches: Vec<f32> = self
            .tokens
            .iter()
            .map(|t| (t.patch.gy as usize * grid_w + t.patch.gx as usize) as f32)
            .collect();
        archive.insert(format!("{prefix}.values"), Tensor::matrix(self.tokens.len(), channels, values)?);
        archive.insert(format!("{prefix}.patches"), Tensor::vector(patches));
        archive.insert(format!("{prefix}.step"), Tensor::vector((0..4).map(|i| ((self.step >> (16 * i)) & 0xffff) as f32).collect()));
        Ok(())
    }

    pub fn read_from(archive: &WeightArchive, prefix: &str, grid_w: usize) -> Result<Self> {
        let missing = |n: &str| Error::Config(format!("archive has no tensor {prefix}.{n}"));
        let values = archive.get(&format!("{prefix}.values")).ok_or_else(|| missing("values"))?;
        let patches = archive.get(&format!("{prefix}.patches")).ok_or_else(|| missing("patches"))?;
        let step = archive.get(&format!("{prefix}.step")).ok_or_else(|| missing("step"))?;
        if step.dims != [4] {
            return Err(Error::Config(format!("{prefix}.step must hold 4 limbs")));
        }
        let step = step.data.iter().enumerate().fold(0u64, |acc, (i, &l)| acc | ((l as u64) << (16 * i)));
        let [rows, width] = values.dims[..] else {
            return Err(Error::Config(format!("{prefix}.values must be 2-D")));
        };
        if patches.len() != rows {
            return Err(Error::Config(format!("{prefix}: {rows} token rows but {} patch ids", patches.len())));
        }
        let tokens = patches
            .data
            .iter()
            .enumerate()
            .map(|(i, &flat)| PatchToken {
                patch: crate::grid::PatchId::new((flat as usize % grid_w) as u16, (flat as usize / grid_w) as u16),
                values: values.data[i * width..(i + 1) * width].to_vec(),
            })
            .collect();
        Ok(Snapshot {
            step,
            time_us: None,
            tokens,
        })
    }
}

/// Incremental token engine over a time-encoded [`Embedder`].
#[derive(Debug)]
pub struct AlertEngine<'a> {
    embedder: &'a Embedder,
    cfg: AlertConfig,
    params: DecayParams,
    rule: Box<dyn UpdateRule>,
    state: TokenState,
    pending: Vec<NormalizedEvent>,
}

impl<'a> AlertEngine<'a> {
    pub fn new(embedder: &'a Embedder, cfg: AlertConfig) -> Result<Self> {
        let rule = rule_registry().create(&cfg.counter_mode, &())?;
        Self::with_rule(embedder, cfg, rule)
    }

    pub fn with_rule(embedder: &'a Embedder, cfg: AlertConfig, rule: Box<dyn UpdateRule>) -> Result<Self> {
        cfg.validate()?;
        if !embedder.input.time_encoded() {
            return Err(Error::Config(format!(
                "incremental updates need a time-encoded input, got {:?}",
                embedder.input.name()
            )));
        }
        Ok(AlertEngine {
            state: init_state(&embedder.grid, embedder.channels()),
            params: cfg.decay(),
            pending: Vec::with_capacity(cfg.k),
            embedder,
            cfg,
            rule,
        })
    }

    pub fn state(&self) -> &TokenState {
        &self.state
    }

    pub fn config(&self) -> &AlertConfig {
        &self.cfg
    }

    pub fn rule(&self) -> &dyn UpdateRule {
        self.rule.as_ref()
    }

    pub fn embedder(&self) -> &Embedder {
        self.embedder
    }

    /// Effective (decayed) value of one channel at the current step.
    pub fn effective_value(&self, patch: usize, channel: usize) -> f64 {
        self.rule.read(&self.state, patch, channel, &self.params)
    }

    /// Queues one raw event; a full batch of `k` is absorbed immediately.
    pub fn push(&mut self, e: &Event) -> Result<()> {
        self.pending.push(normalize(&self.embedder.grid, e)?);
        if self.pending.len() >= self.cfg.k {
            self.flush()?;
        }
        Ok(())
    }

    /// Absorbs any queued events.
    pub fn flush(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let batch = std::mem::take(&mut self.pending);
        let r = self.update(&batch);
        self.pending = batch;
        self.pending.clear();
        r
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Absorbs one arrival batch. Each event advances the global step by one.
    pub fn update(&mut self, events: &[NormalizedEvent]) -> Result<()> {
        let cells = self.state.cells();
        let features = events
            .iter()
            .map(|e| {
                let flat = self.embedder.grid.flat(e.patch);
                if flat >= cells || e.patch.gx as usize >= self.embedder.grid.grid_w() {
                    return Err(Error::Validation(format!("patch {} outside the grid", e.patch)));
                }
                Ok((flat, self.embedder.event_feature(e, 0)?))
            })
            .collect::<Result<Vec<_>>>()?;
        for (flat, f) in features {
            self.state.global_step += 1;
            self.rule.absorb(&mut self.state, flat, &f, &self.params);
            self.state.counts[flat] = self.state.counts[flat].saturating_add(1);
        }
        Ok(())
    }

    /// Closes a readout interval: patches decaying on a majority of channels
    /// lose one activity count (floored at zero).
    pub fn end_interval(&mut self) {
        if self.params.lambda == 0.0 {
            return;
        }
        let c = self.state.channels();
        for p in 0..self.state.cells() {
            if !self.state.touched[p] || self.state.counts[p] == 0 {
                continue;
            }
            let decaying = (0..c)
                .filter(|&j| self.rule.decaying(&self.state, p, j, &self.params))
                .count();
            if 2 * decaying > c {
                self.state.counts[p] -= 1;
            }
        }
    }

    /// Reads the active tokens at the current step. Queued events are not
    /// included; call [`flush`](Self::flush) first.
    pub fn snapshot(&self) -> Snapshot {
        self.snapshot_at(None)
    }

    fn snapshot_at(&self, time_us: Option<u64>) -> Snapshot {
        let grid = &self.embedder.grid;
        let c = self.state.channels();
        let threshold = self.cfg.activation_threshold;
        let tokens = (0..self.state.cells())
            .filter(|&p| self.state.touched[p] && self.state.counts[p] >= threshold)
            .map(|p| {
                let pos = self.embedder.positional.row(p).expect("table sized to grid");
                let values = (0..c)
                    .map(|j| self.rule.read(&self.state, p, j, &self.params) as f32 + pos[j])
                    .collect();
                PatchToken {
                    patch: grid.patch_at(p),
                    values,
                }
            })
            .collect();
        Snapshot {
            step: self.state.global_step,
            time_us,
            tokens,
        }
    }
}

/// When snapshots are taken while replaying a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutSchedule {
    /// Every `delta_t` microseconds, aligned to the first event.
    EveryMicros(u64),
    /// After every `n` absorbed events.
    EveryEvents(usize),
    /// A single readout after the last event.
    Final,
}

impl ReadoutSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            ReadoutSchedule::EveryMicros(0) | ReadoutSchedule::EveryEvents(0) => {
                Err(Error::Config("readout interval must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Replays `events` through the engine, handing each scheduled snapshot to
/// `sink`. Batches never straddle a readout boundary, so snapshot contents
/// and steps do not depend on `k`. A trailing partial interval produces one
/// final snapshot.
pub fn run_stream_with<I, F>(engine: &mut AlertEngine<'_>, events: I, schedule: ReadoutSchedule, mut sink: F) -> Result<()>
where
    I: IntoIterator<Item = Event>,
    F: FnMut(&AlertEngine<'_>, Snapshot) -> Result<()>,
{
    schedule.validate()?;
    let mut next_boundary: Option<u64> = None;
    let mut since_readout = 0usize;
    let mut prev_t: Option<u64> = None;
    for (i, e) in events.into_iter().enumerate() {
        if let Some(prev) = prev_t {
            if e.t < prev {
                return Err(Error::Ordering { index: i, t: e.t, prev });
            }
        }
        prev_t = Some(e.t);
        if let ReadoutSchedule::EveryMicros(dt) = schedule {
            let boundary = next_boundary.get_or_insert(e.t + dt);
            while e.t >= *boundary {
                engine.flush()?;
                engine.end_interval();
                sink(engine, engine.snapshot_at(Some(*boundary)))?;
                since_readout = 0;
                *boundary += dt;
            }
        }
        engine.push(&e)?;
        since_readout += 1;
        if let ReadoutSchedule::EveryEvents(n) = schedule {
            if since_readout == n {
                engine.flush()?;
                engine.end_interval();
                sink(engine, engine.snapshot())?;
                since_readout = 0;
            }
        }
    }
    if since_readout > 0 {
        engine.flush()?;
        engine.end_interval();
        sink(engine, engine.snapshot_at(prev_t))?;
    }
    Ok(())
}

pub fn run_stream<I>(engine: &mut AlertEngine<'_>, events: I, schedule: ReadoutSchedule) -> Result<Vec<Snapshot>>
where
    I: IntoIterator<Item = Event>,
{
    let mut out = Vec::new();
    run_stream_with(engine, events, schedule, |_, s| {
        out.push(s);
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::{input_registry, Mlp, MlpConfig, PositionalTable, TimeEncodingConfig};
    use crate::grid::GridConfig;

    fn embedder(te: bool) -> Embedder {
        let grid = GridConfig::new(16, 16, 4, 4, 0).unwrap();
        let tec = TimeEncodingConfig {
            enabled: te,
            ..Default::default()
        };
        let input = input_registry()
            .create(crate::embedder::encoding_name(&tec), &tec)
            .unwrap();
        let mlp = Mlp::random(
            MlpConfig {
                depth: 2,
                base_channels: 8,
                expansion: 1.0,
                out_channels: 4,
                input_dim: input.input_dim(),
                final_relu: false,
            },
            11,
        )
        .unwrap();
        Embedder::new(grid, input, mlp, PositionalTable::random(16, 4, 12)).unwrap()
    }

    fn events(n: u64) -> Vec<Event> {
        (0..n)
            .map(|i| Event::new(i * 250, ((i * 7) % 16) as u16, ((i * 3) % 16) as u16, if i % 2 == 0 { 1 } else { -1 }))
            .collect()
    }

    #[test]
    fn cold_state_snapshot_is_empty() {
        let emb = embedder(true);
        let eng = AlertEngine::new(&emb, AlertConfig::default()).unwrap();
        let s = eng.snapshot();
        assert!(s.is_empty());
        assert_eq!(s.step, 0);
        assert_eq!(eng.snapshot(), s);
    }

    #[test]
    fn rejects_untimed_input_and_bad_config() {
        let emb = embedder(false);
        assert!(matches!(AlertEngine::new(&emb, AlertConfig::default()), Err(Error::Config(_))));
        let emb = embedder(true);
        let bad = AlertConfig {
            k: 0,
            ..Default::default()
        };
        assert!(AlertEngine::new(&emb, bad).is_err());
        let bad = AlertConfig {
            counter_mode: "wallclock".into(),
            ..Default::default()
        };
        assert!(AlertEngine::new(&emb, bad).is_err());
    }

    #[test]
    fn first_event_sets_only_its_patch() {
        let emb = embedder(true);
        let mut eng = AlertEngine::new(&emb, AlertConfig::default()).unwrap();
        let e = Event::new(10, 5, 9, 1);
        eng.push(&e).unwrap();
        let n = normalize(&emb.grid, &e).unwrap();
        let f = emb.event_feature(&n, 0).unwrap();
        let flat = emb.grid.flat(n.patch);
        for p in 0..16 {
            for (j, &fj) in f.iter().enumerate() {
                let v = eng.effective_value(p, j);
                if p == flat {
                    assert_eq!(v, fj as f64);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert_eq!(eng.snapshot().tokens.len(), 1);
    }

    #[test]
    fn empty_stream_no_snapshots() {
        let emb = embedder(true);
        let mut eng = AlertEngine::new(&emb, AlertConfig::default()).unwrap();
        assert!(run_stream(&mut eng, Vec::new(), ReadoutSchedule::EveryMicros(1000)).unwrap().is_empty());
    }

    #[test]
    fn final_schedule_single_snapshot() {
        let emb = embedder(true);
        let mut eng = AlertEngine::new(&emb, AlertConfig::default()).unwrap();
        let ev = events(200);
        let snaps = run_stream(&mut eng, ev.clone(), ReadoutSchedule::Final).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].step, 200);
        let mut eng2 = AlertEngine::new(&emb, AlertConfig::default()).unwrap();
        for e in &ev {
            eng2.push(e).unwrap();
        }
        assert_eq!(snaps[0].tokens, eng2.snapshot().tokens);
    }

    #[test]
    fn time_schedule_counts_boundaries() {
        let emb = embedder(true);
        let mut eng = AlertEngine::new(&emb, AlertConfig::default()).unwrap();
        // events span 0..49_750 us; 10 ms readouts -> 4 boundaries + tail
        let snaps = run_stream(&mut eng, events(200), ReadoutSchedule::EveryMicros(10_000)).unwrap();
        assert_eq!(snaps.len(), 5);
        assert_eq!(snaps[0].step, 40);
        assert_eq!(snaps[0].time_us, Some(10_000));
        assert_eq!(snaps[4].step, 200);
    }

    #[test]
    fn unsorted_stream_rejected() {
        let emb = embedder(true);
        let mut eng = AlertEngine::new(&emb, AlertConfig::default()).unwrap();
        let ev = vec![Event::new(5, 0, 0, 1), Event::new(4, 0, 0, 1)];
        assert!(matches!(
            run_stream(&mut eng, ev, ReadoutSchedule::Final),
            Err(Error::Ordering { index: 1, .. })
        ));
    }

    #[test]
    fn activity_counter_decrements_under_decay() {
        let emb = embedder(true);
        let cfg = AlertConfig {
            lambda: 0.5,
            n_threshold: 2,
            activation_threshold: 3,
            ..Default::default()
        };
        let mut eng = AlertEngine::new(&emb, cfg).unwrap();
        for i in 0..3 {
            eng.push(&Event::new(i, 0, 0, 1)).unwrap();
        }
        assert_eq!(eng.snapshot().tokens.len(), 1);
        // flood another patch so patch 0 goes stale on every channel
        for i in 0..20 {
            eng.push(&Event::new(10 + i, 15, 15, 1)).unwrap();
        }
        eng.end_interval();
        assert_eq!(eng.state().event_count(0), 2);
        let snap = eng.snapshot();
        assert!(snap.tokens.iter().all(|t| t.patch != crate::grid::PatchId::new(0, 0)));
    }

    #[test]
    fn snapshot_archive_round_trip() {
        let emb = embedder(true);
        let mut eng = AlertEngine::new(&emb, AlertConfig::default()).unwrap();
        for e in events(50) {
            eng.push(&e).unwrap();
        }
        let s = eng.snapshot();
        let mut a = WeightArchive::new();
        s.write_to(&mut a, "snapshot.0", emb.grid.grid_w(), 4).unwrap();
        let back = Snapshot::read_from(&a, "snapshot.0", emb.grid.grid_w()).unwrap();
        assert_eq!(back.tokens, s.tokens);
        assert_eq!(back.step, s.step);
        let big = Snapshot {
            step: (1 << 40) + 12_345_679,
            ..s
        };
        big.write_to(&mut a, "snapshot.1", emb.grid.grid_w(), 4).unwrap();
        assert_eq!(Snapshot::read_from(&a, "snapshot.1", emb.grid.grid_w()).unwrap().step, big.step);
    }
}
