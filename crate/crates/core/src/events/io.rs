use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{check_order, Event, EventStream, StreamHeader};
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"EVT1";
pub const BINARY_VERSION: u32 = 1;
/// magic + version + width + height + count
pub const HEADER_BYTES: usize = 4 + 4 + 2 + 2 + 8;
pub const RECORD_BYTES: usize = 16;

const CSV_COLUMNS: &str = "t,x,y,p";
const CSV_SENSOR_PREFIX: &str = "# sensor=";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamFormat {
    Binary,
    Csv,
}

impl StreamFormat {
    /// `.csv` selects CSV, anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => StreamFormat::Csv,
            _ => StreamFormat::Binary,
        }
    }
}

pub fn read_stream(path: impl AsRef<Path>, format: StreamFormat) -> Result<(StreamHeader, Vec<Event>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let stream = match format {
        StreamFormat::Binary => decode_binary(reader)?,
        StreamFormat::Csv => decode_csv(reader)?,
    };
    let header = *stream.header();
    Ok((header, stream.into_events()))
}

pub fn write_stream(
    events: &[Event],
    header: &StreamHeader,
    path: impl AsRef<Path>,
    format: StreamFormat,
) -> Result<()> {
    let path = path.as_ref();
    check_order(events)?;
    for e in events {
        e.validate(header.sensor_width, header.sensor_height)?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        StreamFormat::Binary => encode_binary(&mut w, header, events),
        StreamFormat::Csv => encode_csv(&mut w, header, events),
    }
    .and_then(|_| w.flush())
    .map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_binary<W: Write>(w: &mut W, header: &StreamHeader, events: &[Event]) -> std::io::Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_u32::<LittleEndian>(BINARY_VERSION)?;
    w.write_u16::<LittleEndian>(header.sensor_width)?;
    w.write_u16::<LittleEndian>(header.sensor_height)?;
    w.write_u64::<LittleEndian>(events.len() as u64)?;
    for e in events {
        w.write_u64::<LittleEndian>(e.t)?;
        w.write_u16::<LittleEndian>(e.x)?;
        w.write_u16::<LittleEndian>(e.y)?;
        w.write_i8(e.p)?;
        w.write_all(&[0u8; 3])?;
    }
    Ok(())
}

pub(crate) fn decode_binary<R: Read>(mut r: R) -> Result<EventStream> {
    let short = |offset: usize, what: &str| Error::Format {
        offset: offset as u64,
        msg: format!("truncated {what}"),
    };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| short(0, "magic"))?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {magic:?}"),
        });
    }
    let version = r.read_u32::<LittleEndian>().map_err(|_| short(4, "version"))?;
    if version != BINARY_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported version {version}"),
        });
    }
    let width = r.read_u16::<LittleEndian>().map_err(|_| short(8, "sensor width"))?;
    let height = r.read_u16::<LittleEndian>().map_err(|_| short(10, "sensor height"))?;
    let count = r.read_u64::<LittleEndian>().map_err(|_| short(12, "event count"))?;

    let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut rec = [0u8; RECORD_BYTES];
    for i in 0..count as usize {
        let offset = HEADER_BYTES + i * RECORD_BYTES;
        r.read_exact(&mut rec).map_err(|_| short(offset, "event record"))?;
        let mut cur = &rec[..];
        let t = cur.read_u64::<LittleEndian>().unwrap();
        let x = cur.read_u16::<LittleEndian>().unwrap();
        let y = cur.read_u16::<LittleEndian>().unwrap();
        let p = cur.read_i8().unwrap();
        if cur != [0u8; 3] {
            return Err(Error::Format {
                offset: (offset + 13) as u64,
                msg: "non-zero padding".into(),
            });
        }
        let e = Event { t, x, y, p };
        e.validate(width, height)?;
        if let Some(prev) = events.last().map(|p: &Event| p.t) {
            if t < prev {
                return Err(Error::Ordering { index: i, t, prev });
            }
        }
        events.push(e);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::Format {
        offset: 0,
        msg: e.to_string(),
    })? != 0
    {
        return Err(Error::Format {
            offset: (HEADER_BYTES + count as usize * RECORD_BYTES) as u64,
            msg: "trailing bytes after declared records".into(),
        });
    }
    EventStream::new(width, height, events)
}

fn encode_csv<W: Write>(w: &mut W, header: &StreamHeader, events: &[Event]) -> std::io::Result<()> {
    writeln!(w, "{CSV_SENSOR_PREFIX}{}x{}", header.sensor_width, header.sensor_height)?;
    writeln!(w, "{CSV_COLUMNS}")?;
    for e in events {
        writeln!(w, "{},{},{},{}", e.t, e.x, e.y, e.p)?;
    }
    Ok(())
}

/// Parses one `t,x,y,p` record.
pub(crate) fn parse_csv_record(line: &str, lineno: u64) -> Result<Event> {
    let bad = |msg: String| Error::Format { offset: lineno, msg };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(bad(format!("expected 4 fields, got {}", fields.len())));
    }
    let t = fields[0].parse::<u64>().map_err(|e| bad(format!("t: {e}")))?;
    let x = fields[1].parse::<u16>().map_err(|e| bad(format!("x: {e}")))?;
    let y = fields[2].parse::<u16>().map_err(|e| bad(format!("y: {e}")))?;
    let p = fields[3].parse::<i8>().map_err(|e| bad(format!("p: {e}")))?;
    Ok(Event { t, x, y, p })
}

fn parse_sensor(text: &str, lineno: u64) -> Result<(u16, u16)> {
    let bad = || Error::Format {
        offset: lineno,
        msg: format!("bad sensor line {text:?}"),
    };
    let (w, h) = text.split_once('x').ok_or_else(bad)?;
    Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?))
}

/// Line offsets in CSV errors are 1-based line numbers.
pub(crate) fn decode_csv<R: BufRead>(r: R) -> Result<EventStream> {
    let mut sensor = None;
    let mut seen_columns = false;
    let mut events: Vec<Event> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| Error::Format {
            offset: lineno,
            msg: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(text) = line.strip_prefix(CSV_SENSOR_PREFIX) {
                sensor = Some(parse_sensor(text, lineno)?);
            } else if rest.trim_start().starts_with("sensor=") {
                sensor = Some(parse_sensor(rest.trim_start().trim_start_matches("sensor="), lineno)?);
            }
            continue;
        }
        if !seen_columns {
            if line.replace(' ', "") != CSV_COLUMNS {
                return Err(Error::Format {
                    offset: lineno,
                    msg: format!("expected header {CSV_COLUMNS:?}, got {line:?}"),
                });
            }
            seen_columns = true;
            continue;
        }
        let e = parse_csv_record(line, lineno)?;
        if let Some((w, h)) = sensor {
            e.validate(w, h)?;
        } else if e.p != 1 && e.p != -1 {
            return Err(Error::Validation(format!("line {lineno}: polarity {} not in {{-1, 1}}", e.p)));
        }
        if let Some(prev) = events.last() {
            if e.t < prev.t {
                return Err(Error::Ordering {
                    index: events.len(),
                    t: e.t,
                    prev: prev.t,
                });
            }
        }
        events.push(e);
    }
    if !seen_columns {
        return Err(Error::Format {
            offset: 0,
            msg: "missing CSV header".into(),
        });
    }
    let (w, h) = sensor.unwrap_or_else(|| {
        let w = events.iter().map(|e| e.x).max().map_or(1, |m| m + 1);
        let h = events.iter().map(|e| e.y).max().map_or(1, |m| m + 1);
        (w, h)
    });
    EventStream::new(w, h, events)
}
