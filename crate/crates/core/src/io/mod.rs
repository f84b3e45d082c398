//! On-disk formats, dataset converters, run configuration and reports.

mod config;
mod container;
mod convert;
mod model;
mod report;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub use config::RunConfig;
pub use container::{
    decode_container, encode_container, read_container, write_container, EpochContainer,
    CONTAINER_MAGIC, CONTAINER_VERSION,
};
pub use convert::{convert_external, convert_text, parse_alias_map, ExternalKind};
pub use model::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use report::{
    curve_csv, emit_report, read_curve_csv, reference_accuracy, summary_text, table_csv,
    REFERENCE_BY_MONTAGE, REFERENCE_BY_TRIALS,
};

use crate::error::{Error, Result};

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// keys and values are trimmed.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1))
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
