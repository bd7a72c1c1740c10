use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, Classifier};
use crate::error::{Error, Result};
use crate::io::{f64s_to_le, le_to_f64s, read_framed, write_framed};

const MAGIC: &[u8; 8] = b"UFACKPT1";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub architecture: Architecture,
    pub seed: u64,
    pub param_count: usize,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

pub fn save_checkpoint(model: &Classifier, path: &Path, meta: BTreeMap<String, String>) -> Result<()> {
    let header = CheckpointHeader {
        version: VERSION,
        architecture: model.architecture().clone(),
        seed: model.seed(),
        param_count: model.params().len(),
        meta,
    };
    let mut payload = Vec::with_capacity(8 * model.params().len());
    f64s_to_le(model.params().iter().copied(), &mut payload);
    write_framed(path, MAGIC, &header, &payload)
}

/// Load a checkpoint, optionally insisting on a particular architecture.
pub fn load_checkpoint(path: &Path, expected: Option<&Architecture>) -> Result<(Classifier, CheckpointHeader)> {
    let (header, payload): (CheckpointHeader, _) = read_framed(path, MAGIC)?;
    if header.version != VERSION {
        return Err(Error::format("version", format!("expected {VERSION}, found {}", header.version)));
    }
    if let Some(arch) = expected {
        if &header.architecture != arch {
            return Err(Error::format("architecture", "checkpoint architecture differs from the requested one"));
        }
    }
    if header.param_count != header.architecture.param_count() {
        return Err(Error::format("param_count", format!("{} does not match architecture", header.param_count)));
    }
    if payload.len() != 8 * header.param_count {
        return Err(Error::format("params", format!("expected {} bytes, found {}", 8 * header.param_count, payload.len())));
    }
    let model = Classifier::from_params(header.architecture.clone(), le_to_f64s(&payload), header.seed)?;
    Ok((model, header))
}
