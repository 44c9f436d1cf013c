//! Binary weight files: magic, schema version, a length-prefixed JSON
//! manifest, then little-endian f64 payloads in manifest order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::layers::HasParams;
use super::tensor::Tensor2;
use super::NetError;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"PSHLAB\x00\x01";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    meta: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// Named tensors plus free-form metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Tensor2<f64>)>,
}

impl Checkpoint {
    pub fn new(meta: serde_json::Value) -> Self {
        Self { meta, tensors: Vec::new() }
    }

    /// Appends every parameter of `model`, names prefixed by `prefix`.
    pub fn add_model<S: Scalar, M: HasParams<S> + ?Sized>(&mut self, prefix: &str, model: &M) {
        model.visit(prefix, &mut |name, p| {
            let (r, c) = p.value.shape();
            let data = p.value.as_slice().iter().map(|v| v.to_f64_lossy()).collect();
            self.tensors.push((name, Tensor2::from_vec(r, c, data).expect("shape")));
        });
    }

    /// Loads parameters of `model` (names prefixed by `prefix`) from this checkpoint.
    pub fn load_model<S: Scalar, M: HasParams<S> + ?Sized>(&self, prefix: &str, model: &mut M) -> Result<(), NetError> {
        let mut err = None;
        model.visit_mut(prefix, &mut |name, p| {
            if err.is_some() {
                return;
            }
            match self.tensors.iter().find(|(n, _)| *n == name) {
                None => err = Some(NetError::Checkpoint(format!("missing tensor {name}"))),
                Some((_, t)) if t.shape() != p.value.shape() => {
                    err = Some(NetError::ShapeMismatch { expected: p.value.shape(), got: t.shape() })
                }
                Some((_, t)) => {
                    for (dst, &src) in p.value.as_mut_slice().iter_mut().zip(t.as_slice()) {
                        *dst = S::lit(src);
                    }
                }
            }
        });
        err.map_or(Ok(()), Err)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), NetError> {
        let manifest = Manifest {
            meta: self.meta.clone(),
            tensors: self.tensors.iter().map(|(n, t)| TensorEntry { name: n.clone(), rows: t.rows(), cols: t.cols() }).collect(),
        };
        let json = serde_json::to_vec(&manifest).map_err(|e| NetError::Checkpoint(e.to_string()))?;
        out.write_all(MAGIC)?;
        out.write_all(&SCHEMA_VERSION.to_le_bytes())?;
        out.write_all(&(json.len() as u64).to_le_bytes())?;
        out.write_all(&json)?;
        let mut buf = Vec::new();
        for (_, t) in &self.tensors {
            buf.clear();
            t.as_slice().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
            out.write_all(&buf)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self, NetError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NetError::Checkpoint("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != SCHEMA_VERSION {
            return Err(NetError::Checkpoint(format!("unsupported schema version {version}")));
        }
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut json = vec![0u8; len];
        input.read_exact(&mut json)?;
        let manifest: Manifest = serde_json::from_slice(&json).map_err(|e| NetError::Checkpoint(e.to_string()))?;
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        for e in manifest.tensors {
            let mut raw = vec![0u8; e.rows * e.cols * 8];
            input.read_exact(&mut raw)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            tensors.push((e.name, Tensor2::from_vec(e.rows, e.cols, data)?));
        }
        Ok(Self { meta: manifest.meta, tensors })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), NetError> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NetError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
