//! Event stream representation, file I/O, synthetic generation and the two
//! temporal sampling modes.

mod io;
mod sampling;
mod synth;

pub use io::{read_stream, write_stream, StreamFormat, BINARY_MAGIC, BINARY_VERSION, HEADER_BYTES, RECORD_BYTES};
pub use sampling::{sample_ccim, sample_ctim, CcimSampler, CtimSampler, Sample, SampleMode, SampleWindow};
pub use synth::{generate_synthetic, SyntheticConfig, SyntheticSource};

use crate::error::{Error, Result};

/// One sensor event. `t` is in microseconds, polarity is `-1` or `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: i8,
}

impl Event {
    pub const fn new(t: u64, x: u16, y: u16, p: i8) -> Self {
        Event { t, x, y, p }
    }

    pub fn validate(&self, width: u16, height: u16) -> Result<()> {
        if self.x >= width || self.y >= height {
            return Err(Error::Validation(format!(
                "event ({}, {}) outside {}x{} sensor",
                self.x, self.y, width, height
            )));
        }
        if self.p != 1 && self.p != -1 {
            return Err(Error::Validation(format!("polarity {} not in {{-1, 1}}", self.p)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub sensor_width: u16,
    pub sensor_height: u16,
    pub event_count: u64,
    /// Last minus first timestamp, in microseconds.
    pub duration: u64,
}

impl StreamHeader {
    pub fn for_events(sensor_width: u16, sensor_height: u16, events: &[Event]) -> Self {
        StreamHeader {
            sensor_width,
            sensor_height,
            event_count: events.len() as u64,
            duration: span(events),
        }
    }
}

/// An immutable, validated, time-ordered event sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    header: StreamHeader,
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(sensor_width: u16, sensor_height: u16, events: Vec<Event>) -> Result<Self> {
        check_order(&events)?;
        for e in &events {
            e.validate(sensor_width, sensor_height)?;
        }
        let header = StreamHeader::for_events(sensor_width, sensor_height, &events);
        Ok(EventStream { header, events })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }
}

pub(crate) fn span(events: &[Event]) -> u64 {
    match (events.first(), events.last()) {
        (Some(a), Some(b)) => b.t.saturating_sub(a.t),
        _ => 0,
    }
}

pub(crate) fn check_order(events: &[Event]) -> Result<()> {
    for (i, w) in events.windows(2).enumerate() {
        if w[1].t < w[0].t {
            return Err(Error::Ordering {
                index: i + 1,
                t: w[1].t,
                prev: w[0].t,
            });
        }
    }
    Ok(())
}
