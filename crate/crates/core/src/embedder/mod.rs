//! Synchronous event-to-token embedding: optional time encoding, shared
//! per-event MLP, channel-wise max pooling and positional embeddings.

mod input;
mod mlp;
mod pool;
mod time;

pub use input::{encoding_name, input_registry, InputEncoding, ShiftedTime, SinusoidalTime};
pub use mlp::{Mlp, MlpConfig, MlpLayer};
pub use pool::{add_positional, max_into, pool_patch, PatchToken, PositionalTable};
pub use time::{encode_time, TimeEncodingConfig};

use crate::error::{Error, Result};
use crate::events::Event;
use crate::grid::{filter_active, partition_sample, GridConfig, NormalizedEvent};

/// Shifts timestamps so the first event sits at 0.
pub fn shift_time_origin(events: &[Event]) -> Result<Vec<Event>> {
    let first = events
        .first()
        .ok_or_else(|| Error::Precondition("cannot shift an empty sample".into()))?
        .t;
    Ok(events.iter().map(|e| Event { t: e.t - first, ..*e }).collect())
}

/// Grid, input layout, feature generator and positional table bundled together.
#[derive(Debug)]
pub struct Embedder {
    pub grid: GridConfig,
    pub input: Box<dyn InputEncoding>,
    pub mlp: Mlp,
    pub positional: PositionalTable,
}

impl Embedder {
    pub fn new(grid: GridConfig, input: Box<dyn InputEncoding>, mlp: Mlp, positional: PositionalTable) -> Result<Self> {
        grid.validate()?;
        if mlp.config.input_dim != input.input_dim() {
            return Err(Error::Config(format!(
                "{} input has {} dims but the MLP expects {}",
                input.name(),
                input.input_dim(),
                mlp.config.input_dim
            )));
        }
        if positional.rows() != grid.cells() || positional.width() != mlp.out_channels() {
            return Err(Error::Config(format!(
                "positional table is {}x{}, grid needs {}x{}",
                positional.rows(),
                positional.width(),
                grid.cells(),
                mlp.out_channels()
            )));
        }
        Ok(Embedder {
            grid,
            input,
            mlp,
            positional,
        })
    }

    pub fn channels(&self) -> usize {
        self.mlp.out_channels()
    }

    pub fn event_feature(&self, ev: &NormalizedEvent, origin: u64) -> Result<Vec<f32>> {
        let mut buf = Vec::with_capacity(self.input.input_dim());
        self.input.encode(ev, origin, &mut buf);
        self.mlp.forward(&buf)
    }

    /// One token per active patch, in row-major patch order.
    pub fn embed_sample(&self, events: &[Event]) -> Result<Vec<PatchToken>> {
        let Some(origin) = events.first().map(|e| e.t) else {
            return Ok(Vec::new());
        };
        let active = filter_active(&self.grid, partition_sample(&self.grid, events)?);
        let mut tokens = Vec::with_capacity(active.patches.len());
        for (patch, evs) in &active.patches {
            let features = evs
                .iter()
                .map(|e| self.event_feature(e, origin))
                .collect::<Result<Vec<_>>>()?;
            let token = pool_patch(*patch, &features)?;
            tokens.push(add_positional(token, self.grid.flat(*patch), &self.positional)?);
        }
        Ok(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PatchId;

    fn embedder(te: bool, threshold: u32) -> Embedder {
        let grid = GridConfig::new(32, 32, 8, 8, threshold).unwrap();
        let tec = TimeEncodingConfig {
            enabled: te,
            ..Default::default()
        };
        let input = input_registry().create(encoding_name(&tec), &tec).unwrap();
        let mlp = Mlp::random(
            MlpConfig {
                depth: 2,
                base_channels: 8,
                expansion: 1.0,
                out_channels: 6,
                input_dim: input.input_dim(),
                final_relu: false,
            },
            5,
        )
        .unwrap();
        let pos = PositionalTable::random(grid.cells(), 6, 6);
        Embedder::new(grid, input, mlp, pos).unwrap()
    }

    #[test]
    fn shift_origin() {
        let ev = [Event::new(100, 0, 0, 1), Event::new(150, 0, 0, 1)];
        let s = shift_time_origin(&ev).unwrap();
        assert_eq!((s[0].t, s[1].t), (0, 50));
        assert_eq!(shift_time_origin(&ev[..1]).unwrap()[0].t, 0);
        assert!(matches!(shift_time_origin(&[]), Err(Error::Precondition(_))));
    }

    #[test]
    fn all_filtered_gives_no_tokens() {
        let e = embedder(true, 5);
        let ev = [Event::new(0, 1, 1, 1), Event::new(1, 20, 20, -1)];
        assert!(e.embed_sample(&ev).unwrap().is_empty());
        assert!(e.embed_sample(&[]).unwrap().is_empty());
    }

    #[test]
    fn singleton_chain() {
        let e = embedder(true, 1);
        let ev = Event::new(42, 9, 17, -1);
        let tokens = e.embed_sample(&[ev]).unwrap();
        assert_eq!(tokens.len(), 1);
        let n = crate::grid::normalize(&e.grid, &ev).unwrap();
        let f = e.event_feature(&n, ev.t).unwrap();
        let flat = e.grid.flat(PatchId::new(1, 2));
        let expected = add_positional(PatchToken { patch: n.patch, values: f }, flat, &e.positional).unwrap();
        assert_eq!(tokens[0], expected);
    }

    #[test]
    fn lert_is_shift_invariant_telert_is_not() {
        let lert = embedder(false, 1);
        let ev: Vec<Event> = (0..10).map(|i| Event::new(i * 1000, (i * 3 % 32) as u16, 4, 1)).collect();
        let later: Vec<Event> = ev.iter().map(|e| Event { t: e.t + 77_777, ..*e }).collect();
        assert_eq!(lert.embed_sample(&ev).unwrap(), lert.embed_sample(&later).unwrap());
        let telert = embedder(true, 1);
        assert_ne!(telert.embed_sample(&ev).unwrap(), telert.embed_sample(&later).unwrap());
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let grid = GridConfig::new(32, 32, 8, 8, 0).unwrap();
        let mlp = Mlp::random(
            MlpConfig {
                depth: 1,
                base_channels: 4,
                expansion: 1.0,
                out_channels: 4,
                input_dim: 4,
                final_relu: false,
            },
            0,
        )
        .unwrap();
        let te = TimeEncodingConfig::default();
        let telert = input_registry().create("telert", &te).unwrap();
        assert!(Embedder::new(grid, telert, mlp.clone(), PositionalTable::zeros(16, 4)).is_err());
        let lert = input_registry().create("lert", &te).unwrap();
        assert!(Embedder::new(grid, lert, mlp, PositionalTable::zeros(15, 4)).is_err());
    }
}
