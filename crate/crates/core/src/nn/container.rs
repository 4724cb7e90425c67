//! Self-describing binary tensor container used for checkpoints and logit
//! sidecars.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"SCDAGC01"          magic, 8 bytes
//! u64                  header length H
//! H bytes              UTF-8 JSON: {"meta": <any>, "tensors": [{"name", "shape": [rows, cols]}, ...]}
//! f64 * Σ rows*cols    tensor values, row-major, in header order
//! ```

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SCDAGC01";

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Array2<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: [usize; 2],
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    tensors: Vec<Entry>,
}

impl Container {
    pub fn new(meta: serde_json::Value) -> Self {
        Self {
            meta,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Array2<f64>) {
        self.tensors.push((name.into(), value));
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(name, v)| Entry {
                    name: name.clone(),
                    shape: [v.nrows(), v.ncols()],
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, v) in &self.tensors {
            for x in v.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Container("bad magic".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        let mut buf = [0u8; 8];
        for Entry { name, shape } in header.tensors {
            let mut data = Vec::with_capacity(shape[0] * shape[1]);
            for _ in 0..shape[0] * shape[1] {
                r.read_exact(&mut buf)
                    .map_err(|e| Error::Container(format!("tensor `{name}` truncated: {e}")))?;
                data.push(f64::from_le_bytes(buf));
            }
            let value = Array2::from_shape_vec((shape[0], shape[1]), data)
                .map_err(|e| Error::Container(e.to_string()))?;
            tensors.push((name, value));
        }
        Ok(Self {
            meta: header.meta,
            tensors,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
