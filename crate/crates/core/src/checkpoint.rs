//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SCNR"            4 bytes magic
//! version           u32
//! d                 u64
//! users, items,
//! categories,
//! scenes            u64 each
//! variant           u8 (0 full, 1 noitem, 2 nosce, 3 noatt)
//! 20 tensors        u64 value count, then that many f64 values (row-major)
//! crc32             u32 over every preceding byte
//! ```
//!
//! Tensors appear in [`TENSOR_NAMES`] order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::EntityCounts;
use crate::model::{ParameterSet, Tensor, Variant, TENSOR_NAMES};

pub const MAGIC: &[u8; 4] = b"SCNR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub variant: Variant,
    pub params: ParameterSet,
}

impl Checkpoint {
    pub fn counts(&self) -> EntityCounts {
        self.params.counts()
    }

    /// Fails unless the checkpoint was built for exactly these entity counts.
    pub fn check_counts(&self, counts: EntityCounts) -> Result<()> {
        let mine = self.counts();
        if mine != counts {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint has {} users, {} items, {} categories, {} scenes; \
                 dataset has {}, {}, {}, {}",
                mine.users,
                mine.items,
                mine.categories,
                mine.scenes,
                counts.users,
                counts.items,
                counts.categories,
                counts.scenes
            )));
        }
        Ok(())
    }
}

pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let p = &ckpt.params;
    let counts = p.counts();
    let mut out = Vec::with_capacity(64 + 8 * p.n_values() + 8 * TENSOR_NAMES.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [p.dim, counts.users, counts.items, counts.categories, counts.scenes] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.push(ckpt.variant.code());
    for t in p.tensors() {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
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
            .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflows usize".into()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut r = Reader { buf: payload, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", version)));
    }
    let dim = r.usize()?;
    let counts = EntityCounts {
        users: r.usize()?,
        items: r.usize()?,
        categories: r.usize()?,
        scenes: r.usize()?,
    };
    let code = r.take(1)?[0];
    let variant = Variant::from_code(code)
        .ok_or_else(|| Error::Checkpoint(format!("unknown variant code {}", code)))?;
    let shapes = ParameterSet::shapes(dim, counts);
    let mut tensors = Vec::with_capacity(shapes.len());
    for (k, &(rows, cols)) in shapes.iter().enumerate() {
        let len = r.usize()?;
        if len != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "tensor {} holds {} values, header implies {}",
                TENSOR_NAMES[k],
                len,
                rows * cols
            )));
        }
        let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Tensor::from_vec(rows, cols, data)?);
    }
    if r.pos != payload.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            payload.len() - r.pos
        )));
    }
    Ok(Checkpoint {
        variant,
        params: ParameterSet::from_tensors(dim, tensors)?,
    })
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, encode(ckpt)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {}", path.display(), m)),
        other => other,
    })
}
