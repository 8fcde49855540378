//! Versioned binary container for parameters and teacher representations.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "AANTCKPT"
//! version  u32
//! n_meta   u32, then n_meta × (key: str, value: str)
//! n_arrays u32, then n_arrays × (name: str, ndim: u32, dims: ndim × u64,
//!                                data: prod(dims) × f64)
//! ```
//!
//! where `str` is a `u32` byte length followed by UTF-8 bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::losses::{InstanceKey, TeacherRepStore};
use crate::model::{ModelDims, ModelParams};

pub const MAGIC: &[u8; 8] = b"AANTCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub meta: Vec<(String, String)>,
    pub arrays: Vec<NamedArray>,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

impl Container {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn meta_usize(&self, key: &str) -> Result<usize> {
        self.meta(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Checkpoint(format!("missing or invalid meta `{key}`")))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            put_str(&mut out, &a.name);
            out.extend_from_slice(&(a.shape.len() as u32).to_le_bytes());
            for &d in &a.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let mut c = Container::default();
        for _ in 0..r.u32()? {
            let k = r.str()?;
            let v = r.str()?;
            c.meta.push((k, v));
        }
        for _ in 0..r.u32()? {
            let name = r.str()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= buf.len()))
                .ok_or_else(|| Error::Checkpoint(format!("array `{name}` too large")))?;
            let bytes = r.take(count * 8)?;
            let data = bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            c.arrays.push(NamedArray { name, shape, data });
        }
        if r.pos != buf.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

/// Hex SHA-256 of the encoded container.
pub fn content_hash(container: &Container) -> String {
    Sha256::digest(container.encode())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Packs model parameters with the config text they were trained under.
pub fn model_container(params: &ModelParams, config: &str) -> Container {
    let d = params.dims();
    Container {
        meta: vec![
            ("kind".into(), "model".into()),
            ("input".into(), d.input.to_string()),
            ("hidden".into(), d.hidden.to_string()),
            ("layers".into(), d.layers.to_string()),
            ("classes".into(), d.classes.to_string()),
            ("config".into(), config.to_string()),
        ],
        arrays: params
            .blocks()
            .iter()
            .map(|b| NamedArray {
                name: b.name.clone(),
                shape: vec![b.rows, b.cols],
                data: b.data.clone(),
            })
            .collect(),
    }
}

pub fn model_from_container(c: &Container) -> Result<ModelParams> {
    if c.meta("kind") != Some("model") {
        return Err(Error::Checkpoint("not a model checkpoint".into()));
    }
    let dims = ModelDims {
        input: c.meta_usize("input")?,
        hidden: c.meta_usize("hidden")?,
        layers: c.meta_usize("layers")?,
        classes: c.meta_usize("classes")?,
    };
    let mut params = ModelParams::zeros(dims)?;
    if c.arrays.len() != params.blocks().len() {
        return Err(Error::Checkpoint(format!(
            "expected {} arrays, found {}",
            params.blocks().len(),
            c.arrays.len()
        )));
    }
    for a in &c.arrays {
        let [rows, cols] = a.shape[..] else {
            return Err(Error::Checkpoint(format!("array `{}` is not 2-D", a.name)));
        };
        params.set_block(&a.name, rows, cols, a.data.clone())?;
    }
    Ok(params)
}

pub fn save_model(params: &ModelParams, config: &str, path: &Path) -> Result<()> {
    model_container(params, config).save(path)
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    model_from_container(&Container::load(path)?)
}

pub fn reps_container(store: &TeacherRepStore) -> Container {
    Container {
        meta: vec![
            ("kind".into(), "teacher_reps".into()),
            ("hidden".into(), store.hidden().to_string()),
            ("teacher_hash".into(), store.teacher_hash().to_string()),
        ],
        arrays: store
            .iter()
            .map(|(k, v)| NamedArray {
                name: format!("rep/{}/{}", k.sequence, k.instance),
                shape: vec![v.len()],
                data: v.to_vec(),
            })
            .collect(),
    }
}

pub fn reps_from_container(c: &Container) -> Result<TeacherRepStore> {
    if c.meta("kind") != Some("teacher_reps") {
        return Err(Error::Checkpoint("not a teacher representation store".into()));
    }
    let hidden = c.meta_usize("hidden")?;
    let mut reps = BTreeMap::new();
    for a in &c.arrays {
        let key = a
            .name
            .strip_prefix("rep/")
            .and_then(|r| r.split_once('/'))
            .and_then(|(s, i)| Some(InstanceKey {
                sequence: s.parse().ok()?,
                instance: i.parse().ok()?,
            }))
            .ok_or_else(|| Error::Checkpoint(format!("bad representation name `{}`", a.name)))?;
        reps.insert(key, a.data.clone());
    }
    TeacherRepStore::new(hidden, c.meta("teacher_hash").unwrap_or_default().to_string(), reps)
}
