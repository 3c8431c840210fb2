//! Run manifests: every command that writes an output directory drops a
//! `manifest.json` recording the tool version, the resolved semantic
//! parameters, content digests of the inputs, and the produced files.
//! Identity is content-based (digests, not paths), so re-running the same
//! command over the same data reproduces the manifest byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Resolved semantic parameters of the run (no filesystem paths).
    pub parameters: Value,
    pub seed: Option<u64>,
    /// sha256 digests of the consumed input files, keyed by file name.
    pub input_digests: BTreeMap<String, String>,
    /// Files produced in the output directory, manifest excluded.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: Value, seed: Option<u64>) -> Self {
        RunManifest {
            tool: "taskcast".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            parameters,
            seed,
            input_digests: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn digest_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.input_digests.insert(name, hex_digest(&bytes));
        Ok(())
    }

    pub fn record_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write(mut self, out_dir: &Path) -> Result<(), CliError> {
        self.outputs.sort();
        let mut bytes = serde_json::to_vec_pretty(&self)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(out_dir.join(MANIFEST_FILE), bytes)
            .map_err(|e| CliError::Validation(format!("cannot write manifest: {e}")))?;
        Ok(())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    format!("sha256:{out}")
}
