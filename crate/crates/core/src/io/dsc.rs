//! DSC1 descriptor sets: magic, `u32 count`, `u32 dim`, then per record a
//! `u16` id length, the UTF-8 id and `dim` f32 LE values.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{GlobalDescriptor, Stage};

pub const DSC_MAGIC: &[u8; 4] = b"DSC1";

pub fn write_descriptors<T: Scalar>(descs: &[GlobalDescriptor<T>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dim = descs.first().map_or(0, |d| d.dim());
    let mut out = Vec::new();
    out.extend_from_slice(DSC_MAGIC);
    out.extend_from_slice(&(descs.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for d in descs {
        if d.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "descriptor `{}` has dim {}, set has dim {dim}",
                d.image_id(),
                d.dim()
            )));
        }
        let id = d.image_id().as_bytes();
        let len = u16::try_from(id.len())
            .map_err(|_| Error::InvalidArgument(format!("image id longer than 65535 bytes: {}", d.image_id())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id);
        for v in d.values() {
            out.extend_from_slice(&v.to_f32_storage().to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a DSC1 file. Values are re-normalized after widening from f32 so
/// the unit-norm invariant holds at the caller's precision; the file does
/// not record the stage, so the caller supplies it.
pub fn read_descriptors<T: Scalar>(path: impl AsRef<Path>, stage: Stage) -> Result<Vec<GlobalDescriptor<T>>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let mut cur = Cursor { bytes: &bytes, pos: 0, path };
    if cur.take(4)? != DSC_MAGIC {
        return Err(Error::malformed(path, "missing DSC1 magic"));
    }
    let count = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u16::from_le_bytes(cur.take(2)?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::malformed(path, "image id is not UTF-8"))?
            .to_string();
        let values = cur
            .take(4 * dim)?
            .chunks_exact(4)
            .map(|c| T::from_f32_lossless(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        out.push(GlobalDescriptor::normalized(id, stage, values)?);
    }
    if cur.pos != bytes.len() {
        return Err(Error::malformed(path, "trailing bytes after last record"));
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::malformed(self.path, "truncated file"));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
