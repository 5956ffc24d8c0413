//! Named f32 tensor store: weights, token dumps and debug state dumps.
//!
//! Layout (little-endian): `"ALRT"`, version `u32`, tensor count `u32`, then
//! per tensor: name length `u16`, UTF-8 name, `ndim: u8`, `ndim` dims as
//! `u32`, row-major `f32` payload.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const ARCHIVE_MAGIC: &[u8; 4] = b"ALRT";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::Config(format!(
                "tensor dims {dims:?} imply {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn vector(data: Vec<f32>) -> Self {
        Tensor {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightArchive {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    /// Looks up `name` and checks its shape.
    pub fn expect(&self, name: &str, dims: &[usize]) -> Result<&Tensor> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::Config(format!("weight archive has no tensor {name:?}")))?;
        if t.dims != dims {
            return Err(Error::Config(format!(
                "tensor {name:?} has shape {:?}, expected {dims:?}",
                t.dims
            )));
        }
        Ok(t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn encode<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(ARCHIVE_MAGIC)?;
        w.write_u32::<LittleEndian>(ARCHIVE_VERSION)?;
        w.write_u32::<LittleEndian>(self.tensors.len() as u32)?;
        for (name, t) in &self.tensors {
            w.write_u16::<LittleEndian>(name.len() as u16)?;
            w.write_all(name.as_bytes())?;
            w.write_u8(t.dims.len() as u8)?;
            for &d in &t.dims {
                w.write_u32::<LittleEndian>(d as u32)?;
            }
            for &v in &t.data {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn decode<R: Read>(r: R) -> Result<Self> {
        let mut r = CountingReader { inner: r, pos: 0 };
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| r.err("truncated magic"))?;
        if &magic != ARCHIVE_MAGIC {
            return Err(Error::Format {
                offset: 0,
                msg: format!("bad archive magic {magic:?}"),
            });
        }
        let version = r.read_u32::<LittleEndian>().map_err(|_| r.err("truncated version"))?;
        if version != ARCHIVE_VERSION {
            return Err(Error::Format {
                offset: 4,
                msg: format!("unsupported archive version {version}"),
            });
        }
        let count = r.read_u32::<LittleEndian>().map_err(|_| r.err("truncated tensor count"))?;
        let mut out = WeightArchive::new();
        for _ in 0..count {
            let name_len = r.read_u16::<LittleEndian>().map_err(|_| r.err("truncated name length"))?;
            let mut name = vec![0u8; name_len as usize];
            r.read_exact(&mut name).map_err(|_| r.err("truncated name"))?;
            let name = String::from_utf8(name).map_err(|_| r.err("tensor name is not UTF-8"))?;
            let ndim = r.read_u8().map_err(|_| r.err("truncated ndim"))?;
            let mut dims = Vec::with_capacity(ndim as usize);
            for _ in 0..ndim {
                dims.push(r.read_u32::<LittleEndian>().map_err(|_| r.err("truncated dims"))? as usize);
            }
            let n: usize = dims.iter().product();
            let mut data = vec![0f32; n];
            r.read_f32_into::<LittleEndian>(&mut data)
                .map_err(|_| r.err(&format!("truncated payload of {name:?}")))?;
            out.insert(name, Tensor { dims, data });
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::decode(BufReader::new(file))
    }
}

struct CountingReader<R> {
    inner: R,
    pos: u64,
}

impl<R> CountingReader<R> {
    fn err(&self, msg: &str) -> Error {
        Error::Format {
            offset: self.pos,
            msg: msg.to_string(),
        }
    }
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.pos += n as u64;
        Ok(n)
    }
}
