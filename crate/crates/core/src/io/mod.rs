//! File formats: native DFT1 tensors, NPY v1.0 tensors, tab-separated
//! manifests and DSC1 descriptor sets.

mod dft;
mod dsc;
mod manifest;
mod npy;

use std::path::Path;

pub use dft::{decode_dft, encode_dft, save_tensor, DFT_MAGIC};
pub use dsc::{read_descriptors, write_descriptors, DSC_MAGIC};
pub use manifest::{load_manifest, DatasetManifest, ManifestEntry, Role};
pub use npy::decode_npy;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::FeatureTensor;

/// Loads a tensor in either DFT1 or NPY v1.0 format, sniffed by magic.
/// The image id defaults to the file stem.
pub fn load_tensor<T: Scalar>(path: impl AsRef<Path>) -> Result<FeatureTensor<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if bytes.starts_with(DFT_MAGIC) {
        decode_dft(&bytes, id).map_err(|e| with_path(e, path))
    } else if bytes.starts_with(npy::NPY_MAGIC) {
        decode_npy(&bytes, id).map_err(|e| with_path(e, path))
    } else {
        Err(Error::malformed(path, "unknown magic (expected DFT1 or NPY)"))
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::MalformedFile { reason, .. } => Error::malformed(path, reason),
        other => other,
    }
}
