//! Token update rules. Each rule owns the interpretation of the stored
//! values in [`TokenState`]: lazily decayed, eagerly decayed, or the
//! literal per-token-update counter.

use std::fmt;

use super::state::TokenState;
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    /// Decay rate per step beyond the staleness threshold.
    pub lambda: f64,
    /// Steps a channel may go un-won before it starts to decay.
    pub n_threshold: u64,
}

impl DecayParams {
    /// `exp(-lambda * max(0, staleness - N))`.
    #[inline]
    pub fn factor(&self, staleness: u64) -> f64 {
        let excess = staleness.saturating_sub(self.n_threshold);
        if excess == 0 || self.lambda == 0.0 {
            1.0
        } else {
            (-self.lambda * excess as f64).exp()
        }
    }
}

pub trait UpdateRule: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Folds one event feature into `patch`. `state.global_step` has already
    /// been advanced to this event's step.
    fn absorb(&self, state: &mut TokenState, patch: usize, feature: &[f32], params: &DecayParams);

    /// Effective channel value at the current step.
    fn read(&self, state: &TokenState, patch: usize, channel: usize, params: &DecayParams) -> f64;

    /// Whether the channel is currently being decayed.
    fn decaying(&self, state: &TokenState, patch: usize, channel: usize, params: &DecayParams) -> bool;
}

/// First event of a patch sets every channel.
fn seed_patch(state: &mut TokenState, patch: usize, feature: &[f32]) {
    let step = state.global_step;
    let r = state.range(patch);
    for (j, &f) in r.zip(feature) {
        state.values[j] = f as f64;
        state.last_win[j] = step;
        state.misses[j] = 0;
    }
    state.touched[patch] = true;
}

/// Staleness on the global per-event step; decay evaluated in closed form on read.
#[derive(Debug, Clone, Copy, Default)]
pub struct LazyGlobalStep;

impl UpdateRule for LazyGlobalStep {
    fn name(&self) -> &'static str {
        "global_step"
    }

    fn absorb(&self, state: &mut TokenState, patch: usize, feature: &[f32], params: &DecayParams) {
        if !state.touched[patch] {
            return seed_patch(state, patch, feature);
        }
        let step = state.global_step;
        for (j, &f) in state.range(patch).zip(feature) {
            let f = f as f64;
            let effective = state.values[j] * params.factor(step - state.last_win[j]);
            if f >= effective {
                state.values[j] = f;
                state.last_win[j] = step;
            }
        }
    }

    fn read(&self, state: &TokenState, patch: usize, channel: usize, params: &DecayParams) -> f64 {
        let j = patch * state.channels() + channel;
        state.values[j] * params.factor(state.global_step - state.last_win[j])
    }

    fn decaying(&self, state: &TokenState, patch: usize, channel: usize, params: &DecayParams) -> bool {
        let j = patch * state.channels() + channel;
        params.lambda > 0.0 && state.global_step - state.last_win[j] > params.n_threshold
    }
}

/// Reference semantics: every step multiplies each stale channel of every
/// token by `exp(-lambda)`. Costs a full sweep per event.
#[derive(Debug, Clone, Copy, Default)]
pub struct EagerGlobalStep;

impl UpdateRule for EagerGlobalStep {
    fn name(&self) -> &'static str {
        "global_step_eager"
    }

    fn absorb(&self, state: &mut TokenState, patch: usize, feature: &[f32], params: &DecayParams) {
        let step = state.global_step;
        if params.lambda > 0.0 {
            let decay = (-params.lambda).exp();
            for p in 0..state.cells() {
                if !state.touched[p] {
                    continue;
                }
                for j in state.range(p) {
                    if step - state.last_win[j] > params.n_threshold {
                        state.values[j] *= decay;
                    }
                }
            }
        }
        if !state.touched[patch] {
            return seed_patch(state, patch, feature);
        }
        for (j, &f) in state.range(patch).zip(feature) {
            let f = f as f64;
            if f >= state.values[j] {
                state.values[j] = f;
                state.last_win[j] = step;
            }
        }
    }

    fn read(&self, state: &TokenState, patch: usize, channel: usize, _params: &DecayParams) -> f64 {
        state.values[patch * state.channels() + channel]
    }

    fn decaying(&self, state: &TokenState, patch: usize, channel: usize, params: &DecayParams) -> bool {
        let j = patch * state.channels() + channel;
        params.lambda > 0.0 && state.global_step - state.last_win[j] > params.n_threshold
    }
}

/// Staleness counted in update attempts on the token itself: max first,
/// then on a loss bump the channel counter and decay once it exceeds N.
/// Tokens whose patch receives no events do not age.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerTokenUpdate;

impl UpdateRule for PerTokenUpdate {
    fn name(&self) -> &'static str {
        "per_update"
    }

    fn absorb(&self, state: &mut TokenState, patch: usize, feature: &[f32], params: &DecayParams) {
        if !state.touched[patch] {
            return seed_patch(state, patch, feature);
        }
        let step = state.global_step;
        let decay = (-params.lambda).exp();
        for (j, &f) in state.range(patch).zip(feature) {
            let f = f as f64;
            if f >= state.values[j] {
                state.values[j] = f;
                state.misses[j] = 0;
                state.last_win[j] = step;
            } else {
                state.misses[j] += 1;
                if state.misses[j] as u64 > params.n_threshold {
                    state.values[j] *= decay;
                }
            }
        }
    }

    fn read(&self, state: &TokenState, patch: usize, channel: usize, _params: &DecayParams) -> f64 {
        state.values[patch * state.channels() + channel]
    }

    fn decaying(&self, state: &TokenState, patch: usize, channel: usize, params: &DecayParams) -> bool {
        let j = patch * state.channels() + channel;
        params.lambda > 0.0 && state.misses[j] as u64 > params.n_threshold
    }
}

/// Built-in rules keyed by their `alert.counter_mode` name.
pub fn rule_registry() -> Registry<dyn UpdateRule> {
    let mut reg: Registry<dyn UpdateRule> = Registry::new("counter mode");
    reg.register("global_step", |_| Box::new(LazyGlobalStep));
    reg.register("global_step_eager", |_| Box::new(EagerGlobalStep));
    reg.register("per_update", |_| Box::new(PerTokenUpdate));
    reg
}
