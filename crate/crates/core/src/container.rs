//! Binary tensor container.
//!
//! Layout: 8-byte magic `NOTENSR1`, a little-endian `u64` header length, a
//! UTF-8 JSON header, then the data section. The header maps each tensor
//! name to `{dtype, shape, offset, nbytes, sha256?}` with offsets relative to
//! the start of the data section; the reserved key `meta` holds free-form
//! metadata. Data is little-endian and row-major.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"NOTENSR1";
const META_KEY: &str = "meta";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::checked(shape, TensorData::F32(data))
    }

    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::checked(shape, TensorData::F64(data))
    }

    fn checked(shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let t = Self { shape, data };
        if t.len() != t.numel() {
            return Err(Error::DimensionMismatch(format!(
                "shape {:?} holds {} elements, data has {}",
                t.shape,
                t.numel(),
                t.len()
            )));
        }
        Ok(t)
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    fn len(&self) -> usize {
        match &self.data {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn nbytes(&self) -> usize {
        self.numel() * self.dtype().size()
    }

    /// Values widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    fn bytes(&self) -> Vec<u8> {
        match &self.data {
            TensorData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            TensorData::F64(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    dtype: DType,
    shape: Vec<usize>,
    offset: u64,
    nbytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sha256: Option<String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Named tensors plus metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub tensors: BTreeMap<String, Tensor>,
    pub meta: Value,
}

impl Container {
    pub fn new(meta: Value) -> Self {
        Self {
            tensors: BTreeMap::new(),
            meta,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if name == META_KEY {
            return Err(Error::InvalidArgument("'meta' is a reserved tensor name".into()));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Format(format!("missing tensor '{name}'")))
    }

    /// Serializes with tensors laid out back to back in name order.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = Map::new();
        let mut data = Vec::new();
        for (name, t) in &self.tensors {
            let bytes = t.bytes();
            let entry = Entry {
                dtype: t.dtype(),
                shape: t.shape.clone(),
                offset: data.len() as u64,
                nbytes: bytes.len() as u64,
                sha256: Some(hex(&Sha256::digest(&bytes))),
            };
            header.insert(name.clone(), serde_json::to_value(entry)?);
            data.extend_from_slice(&bytes);
        }
        header.insert(META_KEY.into(), self.meta.clone());
        let header = serde_json::to_vec(&Value::Object(header))?;
        let mut out = Vec::with_capacity(16 + header.len() + data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&data);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::Format("bad magic, expected NOTENSR1".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let data_start = 16u64
            .checked_add(hlen)
            .filter(|&end| end <= bytes.len() as u64)
            .ok_or_else(|| Error::Format(format!("header length {hlen} runs past end of file")))?
            as usize;
        let header: Value = serde_json::from_slice(&bytes[16..data_start])
            .map_err(|e| Error::Format(format!("header is not valid JSON: {e}")))?;
        let Value::Object(mut header) = header else {
            return Err(Error::Format("header must be a JSON object".into()));
        };
        let meta = header.remove(META_KEY).unwrap_or(Value::Null);
        let data = &bytes[data_start..];

        let mut ranges: Vec<(u64, u64, String)> = Vec::new();
        let mut tensors = BTreeMap::new();
        for (name, raw) in header {
            let entry: Entry = serde_json::from_value(raw)
                .map_err(|e| Error::Format(format!("tensor '{name}': bad header entry: {e}")))?;
            let numel: usize = entry.shape.iter().product();
            let expect = (numel * entry.dtype.size()) as u64;
            if entry.nbytes != expect {
                return Err(Error::Format(format!(
                    "tensor '{name}': nbytes {} does not match shape {:?} ({expect} bytes)",
                    entry.nbytes, entry.shape
                )));
            }
            let end = entry
                .offset
                .checked_add(entry.nbytes)
                .filter(|&e| e <= data.len() as u64)
                .ok_or_else(|| {
                    Error::Format(format!(
                        "tensor '{name}': range {}+{} overruns the {}-byte data section",
                        entry.offset,
                        entry.nbytes,
                        data.len()
                    ))
                })?;
            let raw = &data[entry.offset as usize..end as usize];
            if let Some(sum) = &entry.sha256 {
                if hex(&Sha256::digest(raw)) != sum.to_ascii_lowercase() {
                    return Err(Error::Format(format!("tensor '{name}': checksum mismatch")));
                }
            }
            let data = match entry.dtype {
                DType::F32 => TensorData::F32(
                    raw.chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect(),
                ),
                DType::F64 => TensorData::F64(
                    raw.chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect(),
                ),
            };
            ranges.push((entry.offset, end, name.clone()));
            tensors.insert(
                name,
                Tensor {
                    shape: entry.shape,
                    data,
                },
            );
        }
        ranges.sort();
        for w in ranges.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::Format(format!(
                    "tensors '{}' and '{}' overlap",
                    w[0].2, w[1].2
                )));
            }
        }
        Ok(Self { tensors, meta })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Header only, pretty-printed, for `inspect`.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        for (name, t) in &self.tensors {
            s.push_str(&format!(
                "{name}: {:?} {:?} ({} bytes)\n",
                t.dtype(),
                t.shape,
                t.nbytes()
            ));
        }
        s.push_str(&format!(
            "meta: {}\n",
            serde_json::to_string_pretty(&self.meta).unwrap_or_default()
        ));
        s
    }
}
