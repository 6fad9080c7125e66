//! File formats: `.npy` tensors, statistics and operator containers, manifests.
//!
//! Writes go to a temporary file in the destination directory that is then
//! renamed into place, so readers never observe a partial file.

pub mod container;
pub mod manifest;
pub mod npy;

use std::io::Write;
use std::path::Path;

pub use container::{load_operator, load_stats, save_operator, save_stats};
pub use manifest::{Manifest, Role};
pub use npy::{read_npy as read_tensor, write_npy as write_tensor, Dtype};

use crate::error::{Error, Result};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
