//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "AVIL" | version: u32 | param count: u64 | task count: u32
//!        | per task: byte length u32, UTF-8 id
//!        | param count × f64 values in canonical layout order
//! ```

use std::fs;
use std::path::Path;

use super::{ParamVector, TaskId};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AVIL";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub tasks: Vec<TaskId>,
    pub params: ParamVector,
}

pub fn encode_checkpoint(tasks: &[TaskId], params: &ParamVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + params.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    out.extend_from_slice(&(tasks.len() as u32).to_le_bytes());
    for t in tasks {
        out.extend_from_slice(&(t.as_str().len() as u32).to_le_bytes());
        out.extend_from_slice(t.as_str().as_bytes());
    }
    for v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err("truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn err(&self, reason: &str) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            reason: reason.to_string(),
        }
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut c = Cursor { bytes, pos: 0, path };
    if c.take(4)? != MAGIC {
        c.pos = 0;
        return Err(c.err("bad checkpoint magic"));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(c.err(&format!("unsupported checkpoint version {version}")));
    }
    let count = c.u64()? as usize;
    let ntasks = c.u32()? as usize;
    let mut tasks = Vec::with_capacity(ntasks);
    for _ in 0..ntasks {
        let len = c.u32()? as usize;
        let raw = c.take(len)?;
        let id = std::str::from_utf8(raw).map_err(|_| c.err("task id is not UTF-8"))?;
        tasks.push(TaskId::new(id));
    }
    let raw = c.take(count.checked_mul(8).ok_or_else(|| c.err("parameter count overflow"))?)?;
    let values = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if c.pos != bytes.len() {
        return Err(c.err("trailing bytes after parameters"));
    }
    Ok(Checkpoint {
        tasks,
        params: ParamVector::new(values),
    })
}

pub fn save_checkpoint(path: &Path, tasks: &[TaskId], params: &ParamVector) -> Result<()> {
    fs::write(path, encode_checkpoint(tasks, params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
