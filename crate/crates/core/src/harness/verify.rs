//! Batch-versus-incremental oracle checks.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alert::{AlertConfig, AlertEngine, EagerGlobalStep, LazyGlobalStep, Snapshot};
use crate::embedder::{shift_time_origin, Embedder, PatchToken};
use crate::error::{Error, Result};
use crate::events::{sample_ccim, Event};
use crate::grid::PatchId;

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub trial: usize,
    pub patch: Option<PatchId>,
    pub channel: Option<usize>,
    pub step: u64,
    pub expected: f64,
    pub got: f64,
    pub detail: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trial={} step={}", self.trial, self.step)?;
        if let Some(p) = self.patch {
            write!(f, " patch={},{}", p.gx, p.gy)?;
        }
        if let Some(c) = self.channel {
            write!(f, " channel={c}")?;
        }
        write!(f, " expected={} got={} ({})", self.expected, self.got, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub mode: &'static str,
    pub trials: usize,
    pub passed: usize,
    pub max_abs_diff: f64,
    pub first_divergence: Option<Divergence>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.passed == self.trials && self.first_divergence.is_none()
    }
}

/// First mismatch between batch tokens and a snapshot, bitwise.
pub fn compare_tokens(expected: &[PatchToken], snap: &Snapshot, trial: usize) -> Option<Divergence> {
    let div = |patch, channel, e: f64, g: f64, detail: &str| Divergence {
        trial,
        patch,
        channel,
        step: snap.step,
        expected: e,
        got: g,
        detail: detail.to_string(),
    };
    for (i, (a, b)) in expected.iter().zip(&snap.tokens).enumerate() {
        if a.patch != b.patch {
            return Some(div(Some(a.patch), None, i as f64, i as f64, &format!("snapshot has patch {} here", b.patch)));
        }
        for (j, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
            if x.to_bits() != y.to_bits() {
                return Some(div(Some(a.patch), Some(j), *x as f64, *y as f64, "value"));
            }
        }
    }
    if expected.len() != snap.tokens.len() {
        let n = expected.len().min(snap.tokens.len());
        let patch = expected.get(n).or(snap.tokens.get(n)).map(|t| t.patch);
        return Some(div(patch, None, expected.len() as f64, snap.tokens.len() as f64, "token count"));
    }
    None
}

/// Strict mode: random CCIM windows, time origin shifted to the window
/// start, replayed with no decay under every batch size in `ks` and compared
/// bit-for-bit with the batch embedding.
pub fn verify_strict(
    embedder: &Embedder,
    base: &AlertConfig,
    events: &[Event],
    ne: usize,
    trials: usize,
    ks: &[usize],
    seed: u64,
) -> Result<VerifyReport> {
    if events.len() < ne || ne == 0 {
        return Err(Error::Exhausted {
            start: 0,
            requested: ne,
            available: events.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = VerifyReport {
        mode: "strict",
        trials,
        passed: 0,
        max_abs_diff: 0.0,
        first_divergence: None,
    };
    for trial in 0..trials {
        let start = rng.random_range(0..=events.len() - ne);
        let window = shift_time_origin(sample_ccim(events, ne, start)?.events)?;
        let expected = embedder.embed_sample(&window)?;
        let mut trial_ok = true;
        for &k in ks {
            let cfg = AlertConfig {
                lambda: 0.0,
                k,
                ..base.clone()
            };
            let mut engine = AlertEngine::new(embedder, cfg)?;
            for e in &window {
                engine.push(e)?;
            }
            engine.flush()?;
            let snap = engine.snapshot();
            if let Some(mut d) = compare_tokens(&expected, &snap, trial) {
                d.detail = format!("{} k={k}", d.detail);
                if d.channel.is_some() {
                    report.max_abs_diff = report.max_abs_diff.max((d.expected - d.got).abs());
                }
                report.first_divergence.get_or_insert(d);
                trial_ok = false;
            }
        }
        if trial_ok {
            report.passed += 1;
        }
    }
    Ok(report)
}

/// Decay mode: the lazy closed form and the eager per-step sweep run in
/// lockstep over `steps` events; every touched channel is compared after
/// every event.
pub fn verify_decay(embedder: &Embedder, base: &AlertConfig, events: &[Event], steps: usize, tol: f64) -> Result<VerifyReport> {
    if steps > events.len() {
        return Err(Error::Exhausted {
            start: 0,
            requested: steps,
            available: events.len(),
        });
    }
    let cfg = AlertConfig { k: 1, ..base.clone() };
    let mut lazy = AlertEngine::with_rule(embedder, cfg.clone(), Box::new(LazyGlobalStep))?;
    let mut eager = AlertEngine::with_rule(embedder, cfg, Box::new(EagerGlobalStep))?;
    let mut report = VerifyReport {
        mode: "decay",
        trials: steps,
        passed: 0,
        max_abs_diff: 0.0,
        first_divergence: None,
    };
    let c = embedder.channels();
    for e in &events[..steps] {
        lazy.push(e)?;
        eager.push(e)?;
        let mut step_ok = true;
        for p in (0..lazy.state().cells()).filter(|&p| lazy.state().is_touched(p)) {
            for j in 0..c {
                let (a, b) = (lazy.effective_value(p, j), eager.effective_value(p, j));
                let d = (a - b).abs();
                report.max_abs_diff = report.max_abs_diff.max(d);
                if !(d < tol) {
                    step_ok = false;
                    report.first_divergence.get_or_insert(Divergence {
                        trial: 0,
                        patch: Some(embedder.grid.patch_at(p)),
                        channel: Some(j),
                        step: lazy.state().global_step(),
                        expected: b,
                        got: a,
                        detail: "lazy vs eager".into(),
                    });
                }
            }
        }
        if step_ok {
            report.passed += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{generate_synthetic, SyntheticConfig};
    use crate::harness::Config;
    use crate::model::Model;

    fn small() -> (Config, Vec<Event>) {
        let mut cfg = Config::default();
        for kv in ["sensor.width=32", "sensor.height=32", "mlp.out_channels=16", "head.heads=2"] {
            cfg.apply_override(kv).unwrap();
        }
        let gen = SyntheticConfig {
            duration_us: 50_000,
            ..cfg.gen.clone()
        };
        (cfg, generate_synthetic(&gen, 5).unwrap().into_events())
    }

    #[test]
    fn strict_passes() {
        let (cfg, events) = small();
        let m = Model::random(&cfg).unwrap();
        let r = verify_strict(&m.embedder, &cfg.alert, &events, 512, 5, &[1, 8, 64], 1).unwrap();
        assert!(r.ok(), "{:?}", r.first_divergence);
        assert_eq!(r.passed, 5);
    }

    #[test]
    fn reports_first_diverging_channel() {
        let (cfg, events) = small();
        let m = Model::random(&cfg).unwrap();
        let window = &events[1000..1512];
        let mut expected = m.embedder.embed_sample(window).unwrap();
        let mut engine = AlertEngine::new(&m.embedder, AlertConfig { lambda: 0.0, ..cfg.alert.clone() }).unwrap();
        for e in window {
            engine.push(e).unwrap();
        }
        let snap = engine.snapshot();
        assert_eq!(compare_tokens(&expected, &snap, 0), None);
        expected[1].values[3] = f32::from_bits(expected[1].values[3].to_bits() ^ 1);
        let d = compare_tokens(&expected, &snap, 0).unwrap();
        assert_eq!((d.patch, d.channel, d.step), (Some(expected[1].patch), Some(3), 512));
        expected.pop();
        expected[1] = snap.tokens[1].clone();
        let d = compare_tokens(&expected, &snap, 0).unwrap();
        assert_eq!(d.detail, "token count");
    }

    #[test]
    fn decay_passes() {
        let (cfg, events) = small();
        let m = Model::random(&cfg).unwrap();
        let alert = AlertConfig {
            lambda: 0.05,
            n_threshold: 10,
            ..cfg.alert.clone()
        };
        let r = verify_decay(&m.embedder, &alert, &events, 1000, 1e-6).unwrap();
        assert!(r.ok(), "{:?}", r.first_divergence);
    }
}
