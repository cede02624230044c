//! Binary checkpoint format (`.mncp`), all integers little-endian:
//!
//! ```text
//! "MNCP"  u16 version  u8 variant  u32 alpha  u64 seed  u32 tensor count
//! per tensor: u16 name length, UTF-8 name, u8 rank, u32 extents[rank], f32 values
//! ```
//!
//! Only the standard architecture is stored; the variant and alpha rebuild it.

use std::fs;
use std::path::Path;

use crate::blocks::Variant;
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, ParamStore};

pub const MAGIC: &[u8; 4] = b"MNCP";
pub const FORMAT_VERSION: u16 = 1;

pub fn encode(store: &ParamStore) -> Result<Vec<u8>> {
    if !store.spec.is_standard() {
        return Err(Error::Checkpoint(
            "only the standard MinceptionNet layout can be checkpointed".into(),
        ));
    }
    let named = store.named();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(store.spec.variant.code());
    out.extend_from_slice(&(store.spec.alpha as u32).to_le_bytes());
    out.extend_from_slice(&store.seed.to_le_bytes());
    out.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, t) in named {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ParamStore> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let code = r.u8()?;
    let variant = Variant::from_code(code).ok_or_else(|| Error::Checkpoint(format!("unknown variant code {code}")))?;
    let alpha = r.u32()? as usize;
    if alpha == 0 {
        return Err(Error::Checkpoint("alpha must be positive".into()));
    }
    let seed = r.u64()?;
    let count = r.u32()? as usize;

    let spec = NetworkSpec::minception(variant, alpha);
    let mut params = spec.zero_params();
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    if count != names.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors for variant {variant} alpha {alpha}, found {count}",
            names.len()
        )));
    }
    for (expected, t) in names.iter().zip(params.tensors_mut()) {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if name != expected {
            return Err(Error::Checkpoint(format!("expected tensor {expected}, found {name}")));
        }
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        if shape != t.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {shape:?}, expected {:?}",
                t.shape()
            )));
        }
        for v in t.data_mut() {
            let x = f32::from_le_bytes(r.array()?);
            if !x.is_finite() {
                return Err(Error::Checkpoint(format!("non-finite value in {name}")));
            }
            *v = x as f64;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(ParamStore::from_params(spec, seed, params))
}

pub fn save(store: &ParamStore, path: &Path) -> Result<()> {
    let bytes = encode(store)?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load(path: &Path) -> Result<ParamStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode(&bytes)
}
