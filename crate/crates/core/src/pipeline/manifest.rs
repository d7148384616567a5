//! Per-stage run manifests: content hashes of inputs and outputs plus the
//! configuration that produced them. No timestamps or absolute paths, so a
//! manifest is itself reproducible.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    /// Logical input name to sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the work directory) to sha256.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Option<Manifest>> {
        match std::fs::read(path) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes).ok()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Same stage, version, config and inputs.
    pub fn same_plan(&self, other: &Manifest) -> bool {
        self.stage == other.stage
            && self.version == other.version
            && self.seed == other.seed
            && self.config == other.config
            && self.inputs == other.inputs
    }

    /// Every recorded output still exists with the recorded hash.
    pub fn outputs_intact(&self, work: &Path) -> Result<bool> {
        for (name, hash) in &self.outputs {
            let path = work.join(name);
            if !path.exists() || &sha256_file(&path)? != hash {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}
