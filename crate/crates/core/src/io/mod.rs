//! File formats: MOT-style box files, model files, `key = value` configs.

pub mod config;
pub mod mot;

use std::io::Write;
use std::path::Path;

/// Write `contents` to `path` atomically: a temporary file in the same
/// directory is written, flushed, and renamed over the destination.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
