//! The `.tbm` weight file.
//!
//! ```text
//! "TBML" | version u8 | tensor count u8
//! per tensor: name_len u8 | name | dtype u8 (0 int8, 1 int32) | rank u8
//!             | dims u16 x rank | scale f32 | zero_point i8 | data
//! ```
//! Little-endian throughout.

use crate::error::{Error, Result};

pub const TBM_MAGIC: [u8; 4] = *b"TBML";
pub const TBM_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    Int8 = 0,
    Int32 = 1,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::Int8 => 1,
            DType::Int32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TensorData {
    Int8(Vec<i8>),
    Int32(Vec<i32>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::Int8(_) => DType::Int8,
            TensorData::Int32(_) => DType::Int32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::Int8(v) => v.len(),
            TensorData::Int32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TbmTensor {
    pub name: String,
    pub shape: Vec<u16>,
    pub scale: f32,
    pub zero_point: i8,
    pub data: TensorData,
}

impl TbmTensor {
    pub fn element_count(&self) -> usize {
        self.shape.iter().map(|&d| usize::from(d)).product()
    }

    /// Bytes occupied in flash: data plus scale and zero point.
    pub fn footprint(&self) -> usize {
        self.data.len() * self.data.dtype().size() + 5
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TbmFile {
    pub tensors: Vec<TbmTensor>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Model(format!("truncated file while reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

impl TbmFile {
    pub fn get(&self, name: &str) -> Option<&TbmTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.tensors.len() > usize::from(u8::MAX) {
            return Err(Error::Model("too many tensors for one file".into()));
        }
        let mut out = Vec::new();
        out.extend_from_slice(&TBM_MAGIC);
        out.push(TBM_VERSION);
        out.push(self.tensors.len() as u8);
        for t in &self.tensors {
            if t.name.len() > usize::from(u8::MAX) || t.shape.len() > usize::from(u8::MAX) {
                return Err(Error::Model(format!("tensor '{}': name or rank too long", t.name)));
            }
            if t.element_count() != t.data.len() {
                return Err(Error::Model(format!(
                    "tensor '{}': shape {:?} does not match {} values",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
            out.push(t.name.len() as u8);
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.data.dtype() as u8);
            out.push(t.shape.len() as u8);
            for d in &t.shape {
                out.extend_from_slice(&d.to_le_bytes());
            }
            out.extend_from_slice(&t.scale.to_le_bytes());
            out.push(t.zero_point as u8);
            match &t.data {
                TensorData::Int8(v) => out.extend(v.iter().map(|&q| q as u8)),
                TensorData::Int32(v) => out.extend(v.iter().flat_map(|q| q.to_le_bytes())),
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != TBM_MAGIC {
            return Err(Error::Model("bad magic, not a TBML weight file".into()));
        }
        let version = r.u8("version")?;
        if version != TBM_VERSION {
            return Err(Error::Model(format!("unsupported weight file version {version}")));
        }
        let count = r.u8("tensor count")?;
        let mut tensors = Vec::with_capacity(usize::from(count));
        for i in 0..count {
            let name_len = usize::from(r.u8("tensor name length")?);
            let name = String::from_utf8(r.take(name_len, "tensor name")?.to_vec())
                .map_err(|_| Error::Model(format!("tensor #{i}: name is not utf-8")))?;
            let ctx = |what: &str| format!("{what} of tensor '{name}'");
            let dtype = match r.u8(&ctx("dtype"))? {
                0 => DType::Int8,
                1 => DType::Int32,
                other => return Err(Error::Model(format!("tensor '{name}': unknown dtype {other}"))),
            };
            let rank = usize::from(r.u8(&ctx("rank"))?);
            let dims = r.take(rank * 2, &ctx("dims"))?;
            let shape: Vec<u16> = dims.chunks_exact(2).map(|d| u16::from_le_bytes([d[0], d[1]])).collect();
            let scale = f32::from_le_bytes(r.take(4, &ctx("scale"))?.try_into().unwrap());
            let zero_point = r.u8(&ctx("zero point"))? as i8;
            let n: usize = shape.iter().map(|&d| usize::from(d)).product();
            let raw = r.take(n * dtype.size(), &ctx("data"))?;
            let data = match dtype {
                DType::Int8 => TensorData::Int8(raw.iter().map(|&b| b as i8).collect()),
                DType::Int32 => TensorData::Int32(
                    raw.chunks_exact(4)
                        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
            };
            tensors.push(TbmTensor {
                name,
                shape,
                scale,
                zero_point,
                data,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Model(format!(
                "{} trailing bytes after the last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { tensors })
    }
}
