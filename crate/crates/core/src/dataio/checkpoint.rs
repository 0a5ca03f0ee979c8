//! Versioned JSON model checkpoints. Floats are written in shortest
//! round-trip form, so a reloaded model predicts bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::write_atomic;
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::models::{ModelKind, Predictor, TrainReport};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_FORMAT: &str = "navimpress-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub feature_set: Option<FeatureSet>,
    pub predictor: Predictor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<TrainReport>,
}

#[derive(Deserialize)]
struct Envelope {
    format: String,
    version: u32,
}

impl Checkpoint {
    pub fn new(predictor: Predictor, report: Option<TrainReport>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            kind: predictor.kind(),
            feature_set: predictor.feature_set(),
            predictor,
            report,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_bytes(bytes: &[u8], path: &str) -> Result<Self> {
        let env: Envelope = serde_json::from_slice(bytes)
            .map_err(|e| Error::Parse { path: path.into(), line: e.line(), message: format!("not a readable checkpoint: {e}") })?;
        if env.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse { path: path.into(), line: 1, message: format!("unexpected format `{}`", env.format) });
        }
        if env.version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch { what: "checkpoint", found: env.version, expected: CHECKPOINT_VERSION });
        }
        serde_json::from_slice(bytes).map_err(|e| Error::Parse { path: path.into(), line: e.line(), message: e.to_string() })
    }
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &ck.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes, &path.display().to_string())
}

pub fn save_model(predictor: &Predictor, path: &Path) -> Result<()> {
    save_checkpoint(&Checkpoint::new(predictor.clone(), None), path)
}

pub fn load_model(path: &Path) -> Result<Predictor> {
    Ok(load_checkpoint(path)?.predictor)
}
