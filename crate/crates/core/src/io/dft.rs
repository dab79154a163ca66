use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::FeatureTensor;

pub const DFT_MAGIC: &[u8; 4] = b"DFT1";
const HEADER_LEN: usize = 4 + 12;

/// Serializes to DFT1: magic, `K H W` as u32 LE, then `K·H·W` f32 LE values.
pub fn encode_dft<T: Scalar>(t: &FeatureTensor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.values().len());
    out.extend_from_slice(DFT_MAGIC);
    for d in [t.channels(), t.height(), t.width()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.values() {
        out.extend_from_slice(&v.to_f32_storage().to_le_bytes());
    }
    out
}

pub fn decode_dft<T: Scalar>(bytes: &[u8], image_id: String) -> Result<FeatureTensor<T>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != DFT_MAGIC {
        return Err(Error::malformed("<dft>", "missing DFT1 magic or truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (k, h, w) = (u32_at(4), u32_at(8), u32_at(12));
    let payload = &bytes[HEADER_LEN..];
    let declared = k
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .ok_or_else(|| Error::malformed("<dft>", "header dimensions overflow"))?;
    if !payload.len().is_multiple_of(4) || payload.len() / 4 != declared {
        return Err(Error::DimensionMismatch(format!(
            "header declares {k}x{h}x{w} = {declared} values, payload holds {} bytes",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| T::from_f32_lossless(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    FeatureTensor::new(image_id, k, h, w, values)
}

pub fn save_tensor<T: Scalar>(t: &FeatureTensor<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_dft(t)).map_err(|e| Error::io(path, e))
}
