//! On-disk formats: maps, datasets, traces, model checkpoints and
//! annotation logs.

pub mod adapter;
pub mod annotations;
pub mod checkpoint;
pub mod dataset;
pub mod map;
pub mod trace;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use adapter::{convert_external, DatasetAdapter};
pub use annotations::{parse_annotations, read_annotations, write_annotations};
pub use checkpoint::{load_model, save_model, Checkpoint, CHECKPOINT_VERSION};
pub use dataset::{read_dataset, write_dataset, Dataset, DatasetHeader, DATASET_VERSION};
pub use map::{format_map, parse_map, read_map, write_map};
pub use trace::{export_trace, ReplayTrace, TRACE_VERSION};

/// Write `bytes` to a sibling temporary file and rename it over `path`, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Deserialize one JSON value, reporting the failing field path.
pub(crate) fn from_json_with_path<T: serde::de::DeserializeOwned>(
    text: &str,
    path: &str,
    record: usize,
) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        Error::Schema { path: path.to_string(), record, field, message: e.into_inner().to_string() }
    })
}
