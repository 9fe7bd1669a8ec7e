//! `CCLM` checkpoint files.
//!
//! Layout (little-endian): magic `CCLM`, u32 version (1), u8 arch id
//! (0 = TAN, 1 = MAN), u32 input length, u32 tensor count, then per tensor
//! a u16 name length, the UTF-8 name, u8 rank, rank x u32 dims and the raw
//! `f32` data.

use std::fs;
use std::path::Path;

use super::arch::ArchName;
use super::model::ModelParams;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CCLM";
pub const VERSION: u32 = 1;

pub fn encode(model: &ModelParams) -> Vec<u8> {
    let tensors = model.named_tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(model.arch().name.id());
    out.extend_from_slice(&(model.window_len() as u32).to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.dims().len() as u8);
        for &d in t.dims() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let arch_id = r.u8()?;
    let arch = ArchName::from_id(arch_id).ok_or_else(|| Error::Checkpoint(format!("unknown arch id {arch_id}")))?;
    let input_len = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut model = ModelParams::new(arch, input_len, 0)?;
    let expected = model.named_tensors().len();
    if count != expected {
        return Err(Error::Checkpoint(format!("{arch} needs {expected} tensors, file has {count}")));
    }
    let mut seen = std::collections::HashSet::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let slot = model.tensor_mut(&name).ok_or_else(|| Error::Checkpoint(format!("unexpected tensor {name:?}")))?;
        if slot.dims() != dims.as_slice() {
            return Err(Error::Checkpoint(format!("tensor {name}: dims {dims:?}, expected {:?}", slot.dims())));
        }
        let raw = r.take(slot.len() * 4)?;
        for (v, c) in slot.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
        }
        if name.ends_with(".running_var") && slot.data().iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Checkpoint(format!("{name} has negative entries")));
        }
        if !seen.insert(name.clone()) {
            return Err(Error::Checkpoint(format!("duplicate tensor {name}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(model)
}

pub fn save(model: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
