use super::{span, Event};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Constant count: every window holds `ne` events.
    Ccim { ne: usize },
    /// Constant time: every window covers `delta_t` microseconds.
    Ctim { delta_t: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleWindow {
    pub mode: SampleMode,
    pub start_index: usize,
    pub start_time: u64,
    /// `t_last - t_first` of the selected events.
    pub duration: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<'a> {
    pub window: SampleWindow,
    pub events: &'a [Event],
}

pub fn sample_ccim(events: &[Event], ne: usize, start_index: usize) -> Result<Sample<'_>> {
    if ne == 0 {
        return Err(Error::Config("CCIM window needs ne >= 1".into()));
    }
    let available = events.len().saturating_sub(start_index);
    if available < ne {
        return Err(Error::Exhausted {
            start: start_index,
            requested: ne,
            available,
        });
    }
    let slice = &events[start_index..start_index + ne];
    Ok(Sample {
        window: SampleWindow {
            mode: SampleMode::Ccim { ne },
            start_index,
            start_time: slice[0].t,
            duration: span(slice),
        },
        events: slice,
    })
}

/// All events with `start_time <= t < start_time + delta_t`. May be empty.
pub fn sample_ctim(events: &[Event], delta_t: u64, start_time: u64) -> Result<Sample<'_>> {
    if delta_t == 0 {
        return Err(Error::Config("CTIM window needs delta_t >= 1 us".into()));
    }
    let end_time = start_time.saturating_add(delta_t);
    let lo = events.partition_point(|e| e.t < start_time);
    let hi = lo + events[lo..].partition_point(|e| e.t < end_time);
    let slice = &events[lo..hi];
    Ok(Sample {
        window: SampleWindow {
            mode: SampleMode::Ctim { delta_t },
            start_index: lo,
            start_time,
            duration: span(slice),
        },
        events: slice,
    })
}

/// Consecutive non-overlapping CCIM windows. A tail shorter than `ne` is
/// not yielded; see [`CcimSampler::remainder`].
#[derive(Debug, Clone)]
pub struct CcimSampler<'a> {
    events: &'a [Event],
    ne: usize,
    cursor: usize,
}

impl<'a> CcimSampler<'a> {
    pub fn new(events: &'a [Event], ne: usize) -> Result<Self> {
        if ne == 0 {
            return Err(Error::Config("CCIM window needs ne >= 1".into()));
        }
        Ok(CcimSampler { events, ne, cursor: 0 })
    }

    pub fn remainder(&self) -> &'a [Event] {
        &self.events[self.cursor..]
    }
}

impl<'a> Iterator for CcimSampler<'a> {
    type Item = Sample<'a>;

    fn next(&mut self) -> Option<Sample<'a>> {
        let s = sample_ccim(self.events, self.ne, self.cursor).ok()?;
        self.cursor += self.ne;
        Some(s)
    }
}

/// Consecutive CTIM bins starting at `start_time`, until the last event is covered.
#[derive(Debug, Clone)]
pub struct CtimSampler<'a> {
    events: &'a [Event],
    delta_t: u64,
    next_start: u64,
    done: bool,
}

impl<'a> CtimSampler<'a> {
    pub fn new(events: &'a [Event], delta_t: u64, start_time: u64) -> Result<Self> {
        if delta_t == 0 {
            return Err(Error::Config("CTIM window needs delta_t >= 1 us".into()));
        }
        Ok(CtimSampler {
            events,
            delta_t,
            next_start: start_time,
            done: events.last().is_none_or(|e| e.t < start_time),
        })
    }
}

impl<'a> Iterator for CtimSampler<'a> {
    type Item = Sample<'a>;

    fn next(&mut self) -> Option<Sample<'a>> {
        if self.done {
            return None;
        }
        let s = sample_ctim(self.events, self.delta_t, self.next_start).ok()?;
        self.next_start = self.next_start.saturating_add(self.delta_t);
        if self.events.last().is_none_or(|e| e.t < self.next_start) {
            self.done = true;
        }
        Some(s)
    }
}
