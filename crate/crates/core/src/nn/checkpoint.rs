use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    kind: String,
    sha256: String,
    model: M,
}

/// SHA-256 of the canonical JSON encoding of `value`.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

/// Writes a JSON checkpoint with the layer specs, weights and a content hash.
pub fn save_checkpoint<M: Serialize>(path: &Path, kind: &str, model: &M) -> Result<String> {
    let sha256 = content_hash(model)?;
    let env = Envelope {
        format: "wheelforge-model".into(),
        version: CHECKPOINT_VERSION,
        kind: kind.into(),
        sha256: sha256.clone(),
        model,
    };
    let bytes = serde_json::to_vec(&env)?;
    crate::util::write_atomic(path, &bytes)?;
    Ok(sha256)
}

/// Reads a checkpoint, checking its kind, version and hash.
pub fn load_checkpoint<M: Serialize + DeserializeOwned>(path: &Path, kind: &str) -> Result<M> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope<M> = serde_json::from_slice(&bytes)?;
    if env.format != "wheelforge-model" || env.kind != kind {
        return Err(Error::validation(format!(
            "{} is a {:?} checkpoint, expected {kind:?}",
            path.display(),
            env.kind
        )));
    }
    if env.version != CHECKPOINT_VERSION {
        return Err(Error::validation(format!("unsupported checkpoint version {}", env.version)));
    }
    if content_hash(&env.model)? != env.sha256 {
        return Err(Error::validation(format!("checkpoint {} failed its hash check", path.display())));
    }
    Ok(env.model)
}
